"""Planar character descriptions, state features, goals and action decoding."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import NamedTuple, Union

import numpy as np

from . import mathcore

CHARACTER_FORMAT_VERSION = 1

log = logging.getLogger(__name__)

REVOLUTE = "revolute"
SPHERICAL = "spherical"
JOINT_KINDS = (REVOLUTE, SPHERICAL)


class CharacterFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Link:
    """A rigid link. Vectors are in the link frame, whose origin is the
    proximal joint; ``attach`` is that joint's position in the parent frame."""

    name: str
    mass: float
    length: float
    inertia: float
    com: tuple[float, float]
    attach: tuple[float, float] = (0.0, 0.0)
    contacts: tuple[tuple[float, float], ...] = ()


@dataclass(frozen=True)
class Joint:
    name: str
    parent: str
    child: str
    kind: str = REVOLUTE
    lower: float = -math.pi
    upper: float = math.pi
    torque_limit: float = 100.0
    kp: float = 100.0
    kd: float = 10.0


class ModelArrays(NamedTuple):
    parent: np.ndarray
    anc: np.ndarray
    attach: np.ndarray
    com: np.ndarray
    mass: np.ndarray
    inertia: np.ndarray
    floating: bool
    c_link: np.ndarray
    c_local: np.ndarray
    kp: np.ndarray
    kd: np.ndarray
    lim: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


@dataclass(frozen=True)
class CharacterModel:
    """A tree of links joined by revolute joints, rooted at ``links[0]``.

    Links are stored parent-before-child; joint ``j`` drives link ``j + 1``.
    """

    name: str
    links: tuple[Link, ...]
    joints: tuple[Joint, ...]
    end_effectors: tuple[str, ...] = ()
    termination_links: tuple[str, ...] = ()
    fixed_base: bool = False

    def __post_init__(self):
        _validate(self)

    @property
    def n_links(self) -> int:
        return len(self.links)

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    @property
    def total_mass(self) -> float:
        return float(sum(l.mass for l in self.links))

    def link_index(self, name: str) -> int:
        for i, l in enumerate(self.links):
            if l.name == name:
                return i
        raise KeyError(name)

    @cached_property
    def end_effector_ids(self) -> np.ndarray:
        return np.array([self.link_index(n) for n in self.end_effectors], dtype=np.int64)

    @cached_property
    def termination_ids(self) -> np.ndarray:
        return np.array([self.link_index(n) for n in self.termination_links], dtype=np.int64)

    @cached_property
    def arrays(self) -> ModelArrays:
        n = self.n_links
        parent = np.full(n, -1, dtype=np.int64)
        for j, jt in enumerate(self.joints):
            parent[j + 1] = self.link_index(jt.parent)
        anc = np.zeros((n, n), dtype=np.bool_)
        for i in range(n):
            k = i
            while k >= 0:
                anc[i, k] = True
                k = parent[k]
        c_link, c_local = [], []
        for i, l in enumerate(self.links):
            for p in l.contacts:
                c_link.append(i)
                c_local.append(p)
        return ModelArrays(
            parent=parent,
            anc=anc,
            attach=np.array([l.attach for l in self.links], dtype=float),
            com=np.array([l.com for l in self.links], dtype=float),
            mass=np.array([l.mass for l in self.links], dtype=float),
            inertia=np.array([l.inertia for l in self.links], dtype=float),
            floating=not self.fixed_base,
            c_link=np.array(c_link, dtype=np.int64),
            c_local=np.array(c_local, dtype=float).reshape(-1, 2),
            kp=np.array([j.kp for j in self.joints], dtype=float),
            kd=np.array([j.kd for j in self.joints], dtype=float),
            lim=np.array([j.torque_limit for j in self.joints], dtype=float),
            lower=np.array([j.lower for j in self.joints], dtype=float),
            upper=np.array([j.upper for j in self.joints], dtype=float),
        )

    @property
    def feature_dim(self) -> int:
        return 1 + 7 * self.n_links

    @property
    def action_dim(self) -> int:
        return sum(1 if j.kind == REVOLUTE else 3 for j in self.joints)


def _validate(model: CharacterModel) -> None:
    names = [l.name for l in model.links]
    if len(set(names)) != len(names):
        raise CharacterFormatError("link names must be unique")
    if len(model.links) < 1:
        raise CharacterFormatError("a character needs at least one link")
    if len(model.joints) != len(model.links) - 1:
        raise CharacterFormatError(
            f"expected {len(model.links) - 1} joints for {len(model.links)} links, got {len(model.joints)}")
    for l in model.links:
        if l.mass <= 0 or l.length <= 0 or l.inertia <= 0:
            raise CharacterFormatError(f"link {l.name!r}: mass, length and inertia must be positive")
    index = {n: i for i, n in enumerate(names)}
    for j, jt in enumerate(model.joints):
        if jt.kind not in JOINT_KINDS:
            raise CharacterFormatError(f"joint {jt.name!r}: unknown kind {jt.kind!r}")
        if jt.child != names[j + 1]:
            raise CharacterFormatError(
                f"joint {jt.name!r} must drive link {names[j + 1]!r} (joints follow link order)")
        if jt.parent not in index or index[jt.parent] >= j + 1:
            raise CharacterFormatError(
                f"joint {jt.name!r}: parent {jt.parent!r} must be listed before its child")
        if jt.kp <= 0 or jt.kd <= 0 or jt.torque_limit <= 0:
            raise CharacterFormatError(f"joint {jt.name!r}: kp, kd and torque_limit must be positive")
        if not jt.lower < jt.upper:
            raise CharacterFormatError(f"joint {jt.name!r}: lower limit must be below upper limit")
    for n in model.end_effectors + model.termination_links:
        if n not in index:
            raise CharacterFormatError(f"unknown link {n!r}")
    _lint_damping(model)


def _lint_damping(model: CharacterModel) -> None:
    # reflected inertia approximated by the child link alone, about the joint
    for j, jt in enumerate(model.joints):
        link = model.links[j + 1]
        inertia = link.inertia + link.mass * (link.com[0] ** 2 + link.com[1] ** 2)
        crit = 2.0 * math.sqrt(jt.kp * inertia)
        if jt.kd >= crit:
            log.warning("joint %r is overdamped (kd=%g >= %.3g)", jt.name, jt.kd, crit)


# ---------------------------------------------------------------------------
# file format


def character_to_dict(model: CharacterModel) -> dict:
    return {
        "version": CHARACTER_FORMAT_VERSION,
        "name": model.name,
        "fixed_base": model.fixed_base,
        "links": [
            {
                "name": l.name,
                "mass": l.mass,
                "length": l.length,
                "inertia": l.inertia,
                "com": list(l.com),
                "attach": list(l.attach),
                "contacts": [list(p) for p in l.contacts],
            }
            for l in model.links
        ],
        "joints": [
            {
                "name": j.name,
                "parent": j.parent,
                "child": j.child,
                "kind": j.kind,
                "lower": j.lower,
                "upper": j.upper,
                "torque_limit": j.torque_limit,
                "kp": j.kp,
                "kd": j.kd,
            }
            for j in model.joints
        ],
        "end_effectors": list(model.end_effectors),
        "termination_links": list(model.termination_links),
    }


_LINK_KEYS = {"name", "mass", "length", "inertia", "com", "attach", "contacts"}
_JOINT_KEYS = {"name", "parent", "child", "kind", "lower", "upper", "torque_limit", "kp", "kd"}
_TOP_KEYS = {"version", "name", "fixed_base", "links", "joints", "end_effectors", "termination_links"}


def _reject_unknown(d: dict, allowed: set, where: str) -> None:
    extra = set(d) - allowed
    if extra:
        raise CharacterFormatError(f"{where}: unknown keys {sorted(extra)}")


def character_from_dict(d: dict) -> CharacterModel:
    _reject_unknown(d, _TOP_KEYS, "character")
    if d.get("version") != CHARACTER_FORMAT_VERSION:
        raise CharacterFormatError(f"unsupported character format version {d.get('version')!r}")
    links = []
    for ld in d["links"]:
        _reject_unknown(ld, _LINK_KEYS, f"link {ld.get('name')!r}")
        links.append(Link(
            name=ld["name"],
            mass=float(ld["mass"]),
            length=float(ld["length"]),
            inertia=float(ld["inertia"]),
            com=tuple(float(v) for v in ld["com"]),
            attach=tuple(float(v) for v in ld.get("attach", (0.0, 0.0))),
            contacts=tuple(tuple(float(v) for v in p) for p in ld.get("contacts", ())),
        ))
    joints = []
    for jd in d["joints"]:
        _reject_unknown(jd, _JOINT_KEYS, f"joint {jd.get('name')!r}")
        joints.append(Joint(
            name=jd["name"], parent=jd["parent"], child=jd["child"], kind=jd.get("kind", REVOLUTE),
            lower=float(jd["lower"]), upper=float(jd["upper"]),
            torque_limit=float(jd["torque_limit"]), kp=float(jd["kp"]), kd=float(jd["kd"]),
        ))
    return CharacterModel(
        name=d["name"],
        links=tuple(links),
        joints=tuple(joints),
        end_effectors=tuple(d.get("end_effectors", ())),
        termination_links=tuple(d.get("termination_links", ())),
        fixed_base=bool(d.get("fixed_base", False)),
    )


def load_character(path: Union[str, Path]) -> CharacterModel:
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise CharacterFormatError(f"{path}: not valid JSON ({e})") from e
    except KeyError as e:
        raise CharacterFormatError(f"{path}: missing field {e}") from e
    try:
        return character_from_dict(d)
    except KeyError as e:
        raise CharacterFormatError(f"{path}: missing field {e}") from e


def save_character(model: CharacterModel, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(character_to_dict(model), indent=2) + "\n")


# ---------------------------------------------------------------------------
# goals


@dataclass(frozen=True)
class HeadingGoal:
    direction: tuple[float, float]

    def __post_init__(self):
        if abs(math.hypot(*self.direction) - 1.0) > 1e-9:
            raise ValueError("heading direction must be a unit vector")

    def vector(self, root_xy=None, root_angle=None) -> np.ndarray:
        return np.array(self.direction, dtype=float)


@dataclass(frozen=True)
class StrikeGoal:
    target: tuple[float, float]
    hit: int = 0

    def vector(self, root_xy=(0.0, 0.0), root_angle=0.0) -> np.ndarray:
        rel = mathcore.rot2(-root_angle) @ (np.asarray(self.target) - np.asarray(root_xy))
        return np.array([rel[0], rel[1], float(self.hit)])


@dataclass(frozen=True)
class SkillGoal:
    one_hot: tuple[float, ...]

    def __post_init__(self):
        v = np.asarray(self.one_hot)
        if not (np.count_nonzero(v == 1.0) == 1 and np.count_nonzero(v) == 1):
            raise ValueError("skill goal must be a one-hot vector")

    @property
    def index(self) -> int:
        return int(np.argmax(self.one_hot))

    def vector(self, root_xy=None, root_angle=None) -> np.ndarray:
        return np.array(self.one_hot, dtype=float)


Goal = Union[HeadingGoal, StrikeGoal, SkillGoal, None]


def goal_vector(goal: Goal, root_xy=(0.0, 0.0), root_angle: float = 0.0) -> np.ndarray:
    if goal is None:
        return np.zeros(0)
    return goal.vector(root_xy, root_angle)


# ---------------------------------------------------------------------------
# features


def feature_layout(model: CharacterModel) -> list[str]:
    """Names of every entry produced by :func:`featurize` (goal excluded).

    Slot 0 is the phase. Each link then contributes seven entries: position
    (2), orientation as (sin, cos) (2), linear velocity (2) and angular
    velocity (1). Non-root links are expressed in the root frame. The root
    slot carries world-frame information instead: (0, root height), world
    orientation, and its own velocity in the root frame.
    """
    names = ["phase"]
    for l in model.links:
        names += [f"{l.name}.px", f"{l.name}.py", f"{l.name}.sin", f"{l.name}.cos",
                  f"{l.name}.vx", f"{l.name}.vy", f"{l.name}.w"]
    return names


def featurize(model: CharacterModel, state, phase: float, goal: Goal = None,
              ground: float = 0.0) -> np.ndarray:
    """State features followed by the goal vector.

    ``state`` is a :class:`planarmimic.physics.SimState`.
    """
    from .physics import link_states  # local import: physics depends on this module

    q = np.asarray(state.q, dtype=float)
    qd = np.asarray(state.qd, dtype=float)
    for label, arr in (("q", q), ("qd", qd)):
        bad = np.flatnonzero(~np.isfinite(arr))
        if bad.size:
            raise FloatingPointError(f"non-finite sim state: {label}[{int(bad[0])}] = {arr[bad[0]]}")
    pos, vel, ang, om, origin = link_states(model, q, qd)
    feats = _features(pos, vel, ang, om, origin, phase, ground)
    g = goal_vector(goal, origin, ang[0])
    return np.concatenate([feats, g]) if g.size else feats


def _features(pos, vel, ang, om, origin, phase, ground) -> np.ndarray:
    n = pos.shape[0]
    out = np.empty(1 + 7 * n)
    out[0] = phase
    th0 = ang[0]
    c, s = math.cos(th0), math.sin(th0)
    # world -> root frame
    rel = pos - np.asarray(origin)
    lx = c * rel[:, 0] + s * rel[:, 1]
    ly = -s * rel[:, 0] + c * rel[:, 1]
    lvx = c * vel[:, 0] + s * vel[:, 1]
    lvy = -s * vel[:, 0] + c * vel[:, 1]
    rel_ang = ang - th0
    block = np.empty((n, 7))
    block[:, 0] = lx
    block[:, 1] = ly
    block[:, 2] = np.sin(rel_ang)
    block[:, 3] = np.cos(rel_ang)
    block[:, 4] = lvx
    block[:, 5] = lvy
    block[:, 6] = om
    block[0, 0] = 0.0
    block[0, 1] = origin[1] - ground
    block[0, 2] = math.sin(th0)
    block[0, 3] = math.cos(th0)
    out[1:] = block.ravel()
    return out


# ---------------------------------------------------------------------------
# actions


def decode_action(model: CharacterModel, action) -> np.ndarray:
    """Map a policy action to PD targets, clamped into the joint limits.

    Revolute joints take one angle. Spherical joints take an axis-angle
    triple and yield a unit quaternion (w, x, y, z), so their targets occupy
    four entries of the returned vector.
    """
    a = np.asarray(action, dtype=float)
    if a.ndim != 1 or a.shape[0] != model.action_dim:
        raise ValueError(f"action has shape {a.shape}, expected ({model.action_dim},)")
    if not np.all(np.isfinite(a)):
        raise ValueError("action contains non-finite values")
    if all(j.kind == REVOLUTE for j in model.joints):
        arr = model.arrays
        return np.clip(a, arr.lower, arr.upper)
    out = []
    i = 0
    for j in model.joints:
        if j.kind == REVOLUTE:
            out.append([min(max(a[i], j.lower), j.upper)])
            i += 1
        else:
            rv = a[i:i + 3]
            angle = float(np.linalg.norm(rv))
            if angle > j.upper:
                rv = rv * (j.upper / angle)
            out.append(mathcore.from_rotvec(rv))
            i += 3
    return np.concatenate(out)


# ---------------------------------------------------------------------------
# builders


def rod_inertia(mass: float, length: float) -> float:
    return mass * length * length / 12.0


def _rod(name, mass, length, attach=(0.0, 0.0), contacts=True, width=None):
    tip = (0.0, -length)
    return Link(
        name=name, mass=mass, length=length, inertia=rod_inertia(mass, length),
        com=(0.0, -0.5 * length), attach=attach,
        contacts=((0.0, 0.0), tip) if contacts else (),
    )


def _foot(name, mass, attach, heel=-0.07, toe=0.17, drop=0.06):
    length = toe - heel
    return Link(
        name=name, mass=mass, length=length, inertia=rod_inertia(mass, length),
        com=(0.5 * (heel + toe), -0.5 * drop), attach=attach,
        contacts=((heel, -drop), (toe, -drop)),
    )


def _torso(name, mass, height):
    return Link(
        name=name, mass=mass, length=height, inertia=rod_inertia(mass, height),
        com=(0.0, 0.5 * height), contacts=((0.0, 0.0), (0.0, height)),
    )


def build_hopper() -> CharacterModel:
    """Four-link one-legged hopper (torso, thigh, shin, foot), 17.5 kg."""
    links = (
        _torso("torso", 10.0, 0.5),
        _rod("thigh", 4.0, 0.4),
        _rod("shin", 2.5, 0.4, attach=(0.0, -0.4)),
        _foot("foot", 1.0, attach=(0.0, -0.4)),
    )
    joints = (
        Joint("hip", "torso", "thigh", lower=-0.8, upper=2.4, torque_limit=200.0, kp=400.0, kd=40.0),
        Joint("knee", "thigh", "shin", lower=-2.6, upper=0.0, torque_limit=200.0, kp=400.0, kd=30.0),
        Joint("ankle", "shin", "foot", lower=-1.0, upper=1.0, torque_limit=120.0, kp=300.0, kd=10.0),
    )
    return CharacterModel("hopper", links, joints, end_effectors=("foot",),
                          termination_links=("torso",))


def build_biped() -> CharacterModel:
    """Seven-link planar biped (torso plus two thigh/shin/foot chains), 45 kg."""
    links = (
        _torso("torso", 21.0, 0.6),
        _rod("right_thigh", 6.0, 0.42),
        _rod("right_shin", 3.5, 0.42, attach=(0.0, -0.42)),
        _foot("right_foot", 1.0, attach=(0.0, -0.42)),
        _rod("left_thigh", 6.0, 0.42),
        _rod("left_shin", 3.5, 0.42, attach=(0.0, -0.42)),
        _foot("left_foot", 1.0, attach=(0.0, -0.42)),
    )

    def leg(side):
        return (
            Joint(f"{side}_hip", "torso", f"{side}_thigh", lower=-0.8, upper=2.4,
                  torque_limit=250.0, kp=500.0, kd=50.0),
            Joint(f"{side}_knee", f"{side}_thigh", f"{side}_shin", lower=-2.6, upper=0.0,
                  torque_limit=200.0, kp=500.0, kd=40.0),
            Joint(f"{side}_ankle", f"{side}_shin", f"{side}_foot", lower=-1.0, upper=1.0,
                  torque_limit=120.0, kp=300.0, kd=10.0),
        )

    return CharacterModel("biped", links, leg("right") + leg("left"),
                          end_effectors=("right_foot", "left_foot"), termination_links=("torso",))


def build_pendulum(mass: float = 1.0, length: float = 1.0, torque_limit: float = 2.5,
                   kp: float = 30.0, kd: float = 0.5) -> CharacterModel:
    """Fixed-base single pendulum: a pinned base link and an actuated pole."""
    base = Link("base", 1.0, 0.1, rod_inertia(1.0, 0.1), com=(0.0, 0.0))
    pole = Link("pole", mass, length, rod_inertia(mass, length), com=(0.0, -0.5 * length),
                contacts=())
    joint = Joint("pivot", "base", "pole", lower=-1.0e3, upper=1.0e3,
                  torque_limit=torque_limit, kp=kp, kd=kd)
    return CharacterModel("pendulum", (base, pole), (joint,), end_effectors=("pole",),
                          fixed_base=True)


def build_chain(n_links: int = 3, floating: bool = True, mass: float = 1.0,
                length: float = 0.5) -> CharacterModel:
    """Serial chain of identical rods, used by tests and small examples."""
    links = [_rod("link0", mass, length)]
    joints = []
    for i in range(1, n_links):
        links.append(_rod(f"link{i}", mass, length, attach=(0.0, -length)))
        joints.append(Joint(f"joint{i}", f"link{i - 1}", f"link{i}", lower=-2.5, upper=2.5,
                            torque_limit=100.0, kp=100.0, kd=5.0))
    return CharacterModel(f"chain{n_links}", tuple(links), tuple(joints),
                          end_effectors=(f"link{n_links - 1}",), termination_links=("link0",),
                          fixed_base=not floating)
