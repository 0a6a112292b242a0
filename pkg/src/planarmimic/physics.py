"""Planar articulated dynamics with penalty ground contact and stable PD servos.

The equations of motion ``M(q) qdd + h(q, qd) = tau + J^T f`` are assembled
from per-link Jacobians and integrated with a symplectic drift-kick-drift
scheme. The heavy lifting lives in :mod:`planarmimic._kernels`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels as K
from .charmodel import CharacterModel


class SimulationDiverged(RuntimeError):
    """Raised when a velocity exceeds the blow-up bound or a value goes non-finite."""

    def __init__(self, step_index: int, message: str = ""):
        self.step_index = step_index
        super().__init__(message or f"simulation diverged at substep {step_index}")


@dataclass(frozen=True)
class SimConfig:
    gravity: float = 9.81
    sim_rate: int = 1200
    control_rate: int = 30
    ground_height: float = 0.0
    contact_stiffness: float = 5.0e4
    contact_damping: float = 200.0
    friction_stiffness: float = 5.0e4
    friction_damping: float = 200.0
    friction: float = 0.9
    blowup_velocity: float = 1.0e3

    def __post_init__(self):
        if self.sim_rate <= 0 or self.control_rate <= 0:
            raise ValueError("rates must be positive")
        if self.sim_rate % self.control_rate:
            raise ValueError(
                f"sim_rate ({self.sim_rate}) must be divisible by control_rate ({self.control_rate})")

    @property
    def substeps(self) -> int:
        return self.sim_rate // self.control_rate

    @property
    def dt(self) -> float:
        return 1.0 / self.sim_rate

    @property
    def control_dt(self) -> float:
        return 1.0 / self.control_rate


@dataclass(frozen=True)
class Perturbation:
    force: tuple[float, float]
    start_time: float
    duration: float

    @property
    def end_time(self) -> float:
        return self.start_time + self.duration


@dataclass
class SimState:
    """Generalized coordinates and velocities plus contact bookkeeping.

    ``q = [X, Y, root_angle, joint angles...]``; for floating characters
    ``(X, Y)`` is the whole-body center of mass (see ``root_position`` for the
    root link origin).
    """

    q: np.ndarray
    qd: np.ndarray
    time: float = 0.0
    contacts: np.ndarray = None
    anchor: np.ndarray = None
    anchor_active: np.ndarray = None
    pushes: tuple[Perturbation, ...] = ()
    substep_index: int = 0
    normal_forces: np.ndarray = None  # per contact point, from the last single substep

    def copy(self) -> "SimState":
        return SimState(
            q=self.q.copy(), qd=self.qd.copy(), time=self.time, contacts=self.contacts.copy(),
            anchor=self.anchor.copy(), anchor_active=self.anchor_active.copy(),
            pushes=self.pushes, substep_index=self.substep_index,
            normal_forces=None if self.normal_forces is None else self.normal_forces.copy(),
        )

    @property
    def root_angle(self) -> float:
        return float(self.q[2])

    @property
    def joint_angles(self) -> np.ndarray:
        return self.q[3:]

    @property
    def joint_velocities(self) -> np.ndarray:
        return self.qd[3:]


def make_state(model: CharacterModel, root_pos=(0.0, 0.0), root_angle: float = 0.0,
               joints=None, root_vel=(0.0, 0.0), root_omega: float = 0.0,
               joint_vel=None, time: float = 0.0) -> SimState:
    """Build a state from a root-link description (position of the root origin)."""
    arr = model.arrays
    nj = model.n_joints
    th = np.zeros(nj + 1)
    thd = np.zeros(nj + 1)
    th[0] = root_angle
    thd[0] = 0.0 if model.fixed_base else root_omega
    if joints is not None:
        th[1:] = joints
    if joint_vel is not None:
        thd[1:] = joint_vel
    q, qd = K.root_to_generalized(float(root_pos[0]), float(root_pos[1]),
                                  float(root_vel[0]), float(root_vel[1]), th, thd,
                                  arr.parent, arr.anc, arr.attach, arr.com, arr.mass, arr.floating)
    npts = arr.c_link.shape[0]
    return SimState(q=q, qd=qd, time=time, contacts=np.zeros(model.n_links, dtype=np.bool_),
                    anchor=np.zeros(npts), anchor_active=np.zeros(npts, dtype=np.bool_))


def link_states(model: CharacterModel, q, qd):
    """World COM positions/velocities and angles/rates of all links, plus the root origin."""
    arr = model.arrays
    pos, vel, ang, om, ox, oy = K.link_states(np.asarray(q, float), np.asarray(qd, float), arr.parent,
                                              arr.anc, arr.attach, arr.com, arr.mass, arr.floating)
    return pos, vel, ang, om, (ox, oy)


def root_position(model: CharacterModel, state: SimState) -> np.ndarray:
    return np.array(link_states(model, state.q, state.qd)[4])


def root_velocity(model: CharacterModel, state: SimState) -> np.ndarray:
    """World velocity of the root link origin."""
    pos, vel, ang, om, origin = link_states(model, state.q, state.qd)
    r = np.asarray(origin) - pos[0]
    return vel[0] + om[0] * np.array([-r[1], r[0]])


def center_of_mass(model: CharacterModel, state: SimState) -> tuple[np.ndarray, np.ndarray]:
    pos, vel, *_ = link_states(model, state.q, state.qd)
    m = model.arrays.mass
    return m @ pos / m.sum(), m @ vel / m.sum()


def energy(model: CharacterModel, state: SimState, config: SimConfig) -> tuple[float, float]:
    """Kinetic and gravitational potential energy."""
    arr = model.arrays
    return K.energy(state.q, state.qd, arr.parent, arr.anc, arr.attach, arr.com, arr.mass,
                    arr.inertia, arr.floating, -config.gravity)


def stable_pd_torques(model: CharacterModel, state: SimState, targets, dt: float = 1.0 / 1200) -> np.ndarray:
    """``tau = -kp (th + dt thd - target) - kd thd``, clamped to each joint's torque limit."""
    arr = model.arrays
    out = np.empty(model.n_joints)
    K.spd_torques(np.ascontiguousarray(state.q[3:]), np.ascontiguousarray(state.qd[3:]),
                  np.asarray(targets, dtype=float), arr.kp, arr.kd, arr.lim, dt, out)
    return out


def step(model: CharacterModel, state: SimState, torques, config: SimConfig) -> SimState:
    """Advance one simulation substep with the given joint torques (applied as-is)."""
    arr = model.arrays
    s = state.copy()
    h = config.dt
    force, _ = _push_window(s, s.time)
    normal = np.zeros(arr.c_link.shape[0])
    K.substep(s.q, s.qd, s.anchor, s.anchor_active, np.asarray(torques, dtype=float), force, 0,
              h, 0.0, -config.gravity, arr.parent, arr.anc, arr.attach, arr.com, arr.mass,
              arr.inertia, arr.floating, arr.c_link, arr.c_local, config.ground_height,
              config.contact_stiffness, config.contact_damping, config.friction_stiffness,
              config.friction_damping, config.friction, s.contacts, normal)
    s.normal_forces = normal
    s.substep_index += 1
    s.time = state.time + h
    if not (np.all(np.abs(s.qd) <= config.blowup_velocity) and np.all(np.isfinite(s.q))):
        raise SimulationDiverged(s.substep_index - 1)
    return s


def _push_window(state: SimState, t: float):
    for p in state.pushes:
        if p.start_time - 1e-9 <= t < p.end_time - 1e-9:
            return np.array(p.force, dtype=float), p
    return np.zeros(2), None


def control_step(model: CharacterModel, state: SimState, targets, config: SimConfig,
                 torque_log: Optional[list] = None) -> SimState:
    """Hold PD targets for one control period, recomputing stable PD torques every substep.

    If ``torque_log`` is given, the per-joint maximum absolute applied torque
    over the period is appended to it.
    """
    s = state.copy()
    advance(model, s, np.asarray(targets, dtype=float), config, torque_log)
    return s


def advance(model: CharacterModel, s: SimState, targets: np.ndarray, config: SimConfig,
            torque_log: Optional[list] = None) -> None:
    """In-place version of :func:`control_step` (used by the environments)."""
    arr = model.arrays
    nsub = config.substeps
    h = config.dt
    tau_max = np.zeros(model.n_joints)
    t0 = s.time
    t1 = t0 + nsub * h
    # split the period at push boundaries so each kernel call sees one push
    bounds = [0]
    for p in s.pushes:
        for edge in (p.start_time, p.end_time):
            k = int(math.ceil((edge - t0) / h - 1e-6))
            if 0 < k < nsub:
                bounds.append(k)
    bounds = sorted(set(bounds)) + [nsub]
    for a, b in zip(bounds[:-1], bounds[1:]):
        ta = t0 + a * h
        force, push = _push_window(s, ta)
        pt0, pt1 = (push.start_time, push.end_time) if push is not None else (0.0, 0.0)
        res = K.control_loop(s.q, s.qd, s.anchor, s.anchor_active, targets, b - a, h, ta, 0.0,
                             -config.gravity, arr.parent, arr.anc, arr.attach, arr.com, arr.mass,
                             arr.inertia, arr.floating, arr.c_link, arr.c_local,
                             config.ground_height, config.contact_stiffness, config.contact_damping,
                             config.friction_stiffness, config.friction_damping, config.friction,
                             arr.kp, arr.kd, arr.lim, force, 0, pt0, pt1,
                             config.blowup_velocity, s.contacts, tau_max)
        if res != K.DIVERGED_NONE:
            raise SimulationDiverged(s.substep_index + a + res)
    s.substep_index += nsub
    s.time = t1
    if torque_log is not None:
        torque_log.append(tau_max)


def check_termination(model: CharacterModel, state: SimState) -> bool:
    """True iff any termination link touches the ground."""
    ids = model.termination_ids
    return bool(ids.size and np.any(state.contacts[ids]))


def apply_perturbation(state: SimState, force, duration: float, start_time: float) -> Perturbation:
    """Schedule an external force on the root link over [start_time, start_time + duration).

    Raises:
        ValueError: if ``duration`` is not positive or the window overlaps an
            already scheduled push.
    """
    if duration <= 0:
        raise ValueError("perturbation duration must be positive")
    p = Perturbation(force=(float(force[0]), float(force[1])), start_time=float(start_time),
                     duration=float(duration))
    for other in state.pushes:
        if p.start_time < other.end_time and other.start_time < p.end_time:
            raise ValueError(
                f"perturbation [{p.start_time}, {p.end_time}) overlaps [{other.start_time}, {other.end_time})")
    state.pushes = state.pushes + (p,)
    return p
