"""Reference motion clips: storage, phase indexing, interpolation and reference states."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from . import mathcore

CLIP_FORMAT_VERSION = 1
LOOP_TOL = 1e-3
JOINT_KINDS = {"revolute": 1, "spherical": 4}


class ClipFormatError(ValueError):
    """Raised for malformed or inconsistent clip data."""


@dataclass(frozen=True)
class Pose:
    root_pos: np.ndarray
    root_rot: float
    joints: np.ndarray  # one entry per revolute joint, (w, x, y, z) per spherical joint


@dataclass(frozen=True)
class ReferenceState:
    phase: float
    root_pos: np.ndarray
    root_rot: float
    joints: np.ndarray
    root_vel: np.ndarray
    root_omega: float
    joint_vel: np.ndarray  # one entry per revolute joint, angular velocity triple per spherical


class MotionClip:
    """A time-indexed sequence of poses.

    ``frames`` rows are ``[root_x, root_y, root_rot, joint values...]``.
    Instances are treated as immutable.
    """

    def __init__(self, name: str, loop: bool, frame_duration: float, joints, frames):
        self.name = str(name)
        self.loop = bool(loop)
        self.frame_duration = float(frame_duration)
        self.joints = tuple((str(n), str(k)) for n, k in joints)
        self.frames = np.array(frames, dtype=float)
        self.frames.setflags(write=False)
        self._validate()
        offs = []
        col = 3
        for _, kind in self.joints:
            offs.append(col)
            col += JOINT_KINDS[kind]
        self._cols = tuple(offs)

    def _validate(self):
        if not (self.frame_duration > 0.0 and math.isfinite(self.frame_duration)):
            raise ClipFormatError(f"clip '{self.name}': frame_duration must be positive")
        for n, k in self.joints:
            if k not in JOINT_KINDS:
                raise ClipFormatError(f"clip '{self.name}': joint '{n}' has unknown kind '{k}'")
        width = 3 + sum(JOINT_KINDS[k] for _, k in self.joints)
        if self.frames.ndim != 2 or self.frames.shape[0] < 2:
            raise ClipFormatError(f"clip '{self.name}': need at least 2 frames")
        if self.frames.shape[1] != width:
            raise ClipFormatError(
                f"clip '{self.name}': frame rows have {self.frames.shape[1]} values, "
                f"joint layout needs {width}")
        if not np.all(np.isfinite(self.frames)):
            raise ClipFormatError(f"clip '{self.name}': non-finite frame values")
        if self.loop:
            first, last = self.frames[0], self.frames[-1]
            if abs(last[2] - first[2]) > LOOP_TOL:
                raise ClipFormatError(
                    f"clip '{self.name}': loop clip root rotation differs between first and last frame "
                    f"({first[2]:.6g} vs {last[2]:.6g})")
            col = 3
            for n, k in self.joints:
                w = JOINT_KINDS[k]
                if k == "revolute":
                    gap = abs(last[col] - first[col])
                else:
                    gap = mathcore.quat_angle(mathcore.quat_diff(
                        mathcore.quat(*last[col:col + 4]), mathcore.quat(*first[col:col + 4])))
                if gap > LOOP_TOL:
                    raise ClipFormatError(
                        f"clip '{self.name}': loop clip joint '{n}' differs between first and last frame "
                        f"by {gap:.6g} rad")
                col += w

    # ------------------------------------------------------------------

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def cycle_duration(self) -> float:
        return (self.n_frames - 1) * self.frame_duration

    @property
    def cycle_offset(self) -> np.ndarray:
        """Root translation accumulated over one cycle (zero for acyclic clips)."""
        if not self.loop:
            return np.zeros(2)
        return self.frames[-1, :2] - self.frames[0, :2]

    @property
    def joint_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.joints)

    @property
    def velocity_dim(self) -> int:
        return sum(1 if k == "revolute" else 3 for _, k in self.joints)

    def _interp_row(self, phi: float) -> np.ndarray:
        n = self.n_frames
        x = phi * (n - 1)
        k = round(x)
        if abs(x - k) < 1e-9:
            return self.frames[min(max(k, 0), n - 1)].copy()
        k = min(int(math.floor(x)), n - 2)
        frac = x - k
        a, b = self.frames[k], self.frames[k + 1]
        row = a + frac * (b - a)
        for (_, kind), col in zip(self.joints, self._cols):
            if kind == "spherical":
                row[col:col + 4] = mathcore.slerp(mathcore.quat(*a[col:col + 4]),
                                                  mathcore.quat(*b[col:col + 4]), frac)
        return row

    def _row_at_time(self, t: float) -> np.ndarray:
        T = self.cycle_duration
        if self.loop:
            cycles = math.floor(t / T)
            row = self._interp_row(t / T - cycles)
            row[:2] += cycles * self.cycle_offset
            return row
        return self._interp_row(min(max(t / T, 0.0), 1.0))

    def _diff(self, hi: np.ndarray, lo: np.ndarray, h: float):
        d = (hi - lo) / h
        root_vel = d[:2]
        root_omega = float(d[2])
        jv = []
        for (_, kind), col in zip(self.joints, self._cols):
            if kind == "revolute":
                jv.append(d[col])
            else:
                rel = mathcore.quat_diff(mathcore.quat(*hi[col:col + 4]), mathcore.quat(*lo[col:col + 4]))
                jv.extend(mathcore.to_rotvec(rel) / h)
        return root_vel, root_omega, np.array(jv)


def _split(row: np.ndarray) -> Pose:
    return Pose(root_pos=row[:2].copy(), root_rot=float(row[2]), joints=row[3:].copy())


def _check_phase(phi: float) -> float:
    phi = float(phi)
    if not (0.0 <= phi <= 1.0):
        raise ValueError(f"phase must lie in [0, 1], got {phi}")
    return phi


def sample_pose(clip: MotionClip, phi: float) -> Pose:
    """Pose at phase ``phi``: linear interpolation between bracketing frames, slerp for quaternions."""
    return _split(clip._interp_row(_check_phase(phi)))


def target_velocity(clip: MotionClip, phi: float):
    """Central finite-difference velocities ``(root_vel, root_omega, joint_vel)`` at ``phi``.

    The step is one frame. Loop clips wrap across the cycle boundary (root
    translation carries the cycle offset); acyclic clips fall back to one-sided
    differences at the ends.
    """
    phi = _check_phase(phi)
    h = clip.frame_duration
    T = clip.cycle_duration
    t = phi * T
    if clip.loop:
        return clip._diff(clip._row_at_time(t + h), clip._row_at_time(t - h), 2.0 * h)
    if t - h < 0.0:
        return clip._diff(clip._row_at_time(t + h), clip._row_at_time(t), h)
    if t + h > T:
        return clip._diff(clip._row_at_time(t), clip._row_at_time(t - h), h)
    return clip._diff(clip._row_at_time(t + h), clip._row_at_time(t - h), 2.0 * h)


def reference_state(clip: MotionClip, phi: float) -> ReferenceState:
    pose = sample_pose(clip, phi)
    rv, rw, jv = target_velocity(clip, phi)
    return ReferenceState(phase=float(phi), root_pos=pose.root_pos, root_rot=pose.root_rot,
                          joints=pose.joints, root_vel=rv, root_omega=rw, joint_vel=jv)


def sample_reference_state(clip: MotionClip, mode: str, rng: np.random.Generator) -> ReferenceState:
    """``mode='rsi'`` draws phi ~ U[0, 1); ``mode='fixed'`` returns the state at phi = 0."""
    if mode == "rsi":
        return reference_state(clip, float(rng.random()))
    if mode == "fixed":
        return reference_state(clip, 0.0)
    raise ValueError(f"unknown reference-state mode '{mode}' (expected 'rsi' or 'fixed')")


def advance_phase(clip: MotionClip, phi: float, dt: float) -> float:
    """Advance by ``dt`` seconds; loop clips wrap modulo 1, acyclic clips saturate at 1."""
    if dt < 0.0:
        raise ValueError(f"dt must be non-negative, got {dt}")
    nxt = phi + dt / clip.cycle_duration
    if clip.loop:
        return nxt % 1.0
    return min(nxt, 1.0)


# ---------------------------------------------------------------------------
# file format


def clip_to_dict(clip: MotionClip) -> dict:
    return {
        "version": CLIP_FORMAT_VERSION,
        "name": clip.name,
        "loop": clip.loop,
        "frame_duration": clip.frame_duration,
        "joints": [{"name": n, "kind": k} for n, k in clip.joints],
        "frames": clip.frames.tolist(),
    }


_CLIP_KEYS = {"version", "name", "loop", "frame_duration", "joints", "frames"}


def clip_from_dict(doc: dict, source: str = "<clip>") -> MotionClip:
    if not isinstance(doc, dict):
        raise ClipFormatError(f"{source}: top level must be an object")
    unknown = set(doc) - _CLIP_KEYS
    if unknown:
        raise ClipFormatError(f"{source}: unknown keys {sorted(unknown)}")
    missing = _CLIP_KEYS - set(doc)
    if missing:
        raise ClipFormatError(f"{source}: missing keys {sorted(missing)}")
    if doc["version"] != CLIP_FORMAT_VERSION:
        raise ClipFormatError(f"{source}: unsupported clip version {doc['version']!r}")
    try:
        joints = [(j["name"], j["kind"]) for j in doc["joints"]]
        frames = np.array(doc["frames"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ClipFormatError(f"{source}: malformed joints or frames ({exc})") from exc
    if not isinstance(doc["loop"], bool):
        raise ClipFormatError(f"{source}: 'loop' must be a boolean")
    return MotionClip(doc["name"], doc["loop"], doc["frame_duration"], joints, frames)


def load_clip(path: Union[str, Path]) -> MotionClip:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ClipFormatError(f"{path}: parse error: {exc}") from exc
    return clip_from_dict(doc, str(path))


def save_clip(clip: MotionClip, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(clip_to_dict(clip), indent=1) + "\n")


def check_equal_cycles(clips) -> float:
    """Common cycle duration of a clip set; raises if the durations differ."""
    clips = list(clips)
    if not clips:
        raise ValueError("empty clip set")
    T = clips[0].cycle_duration
    for c in clips[1:]:
        if abs(c.cycle_duration - T) > 1e-9:
            raise ClipFormatError(
                f"clips '{clips[0].name}' and '{c.name}' have different cycle durations "
                f"({T:.6g} s vs {c.cycle_duration:.6g} s)")
    return T
