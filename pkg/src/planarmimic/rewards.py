"""Imitation and task rewards.

Every term has the form ``exp(-scale * squared_error)`` and lies in (0, 1].
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .mathcore import exp_kernel, normalize_angle, quat_angle, quat_diff


@dataclass(frozen=True)
class RewardWeights:
    imitation_weight: float = 0.7
    task_weight: float = 0.3
    pose_weight: float = 0.65
    velocity_weight: float = 0.1
    end_effector_weight: float = 0.15
    com_weight: float = 0.1
    pose_scale: float = 2.0
    velocity_scale: float = 0.1
    end_effector_scale: float = 40.0
    com_scale: float = 10.0
    heading_scale: float = 2.5
    strike_scale: float = 4.0
    target_speed: float = 1.0
    hit_radius: float = 0.2

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v >= 0.0):
                raise ValueError(f"reward weight '{f.name}' must be a finite non-negative number, got {v!r}")
        for name in ("pose_scale", "velocity_scale", "end_effector_scale", "com_scale",
                     "heading_scale", "strike_scale"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"'{name}' must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "RewardWeights":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown reward keys {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in doc.items()})


DEFAULT_WEIGHTS = RewardWeights()


def _rotation_error_sq(sim, ref) -> float:
    sim = np.asarray(sim, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if sim.shape != ref.shape:
        raise ValueError(f"joint layout mismatch: {sim.shape} vs {ref.shape}")
    if sim.ndim == 1:
        d = normalize_angle(ref - sim)
        return float(np.sum(np.square(d)))
    if sim.ndim == 2 and sim.shape[1] == 4:
        return float(sum(quat_angle(quat_diff(r, s)) ** 2 for s, r in zip(sim, ref)))
    raise ValueError(f"expected (J,) planar angles or (J, 4) quaternions, got shape {sim.shape}")


def _vector_error_sq(sim, ref) -> float:
    sim = np.asarray(sim, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if sim.shape != ref.shape:
        raise ValueError(f"shape mismatch: {sim.shape} vs {ref.shape}")
    return float(np.sum(np.square(ref - sim)))


def pose_reward(sim_joints, ref_joints, scale: float = 2.0) -> float:
    """Planar angles use the wrapped angle difference; quaternions the rotation angle of the difference."""
    return exp_kernel(_rotation_error_sq(sim_joints, ref_joints), scale)


def velocity_reward(sim_vel, ref_vel, scale: float = 0.1) -> float:
    return exp_kernel(_vector_error_sq(sim_vel, ref_vel), scale)


def end_effector_reward(sim_pos, ref_pos, scale: float = 40.0) -> float:
    """World end-effector positions, one row per end effector."""
    return exp_kernel(_vector_error_sq(sim_pos, ref_pos), scale)


def com_reward(sim_com, ref_com, scale: float = 10.0) -> float:
    return exp_kernel(_vector_error_sq(sim_com, ref_com), scale)


def imitation_reward(terms, weights: RewardWeights = DEFAULT_WEIGHTS) -> float:
    """Weighted sum of the (pose, velocity, end-effector, com) terms."""
    rp, rv, re, rc = terms
    return (weights.pose_weight * rp + weights.velocity_weight * rv
            + weights.end_effector_weight * re + weights.com_weight * rc)


def combined_reward(r_imitation: float, r_task, weights: RewardWeights = DEFAULT_WEIGHTS) -> float:
    """``w_I r_I + w_G r_G``.

    With ``r_task=None`` (no task) the task share is dropped and ``w_I r_I`` is
    normalized by ``w_I``, which leaves ``r_I`` itself.
    """
    if r_task is None:
        return float(r_imitation)
    return weights.imitation_weight * r_imitation + weights.task_weight * r_task


def max_step_reward(weights: RewardWeights = DEFAULT_WEIGHTS, has_task: bool = False) -> float:
    """Largest per-step reward, used to normalize returns."""
    if not has_task:
        return 1.0
    return weights.imitation_weight + weights.task_weight


def heading_reward(com_vel, direction, target_speed: float = 1.0, scale: float = 2.5) -> float:
    """Penalizes moving slower than ``target_speed`` along ``direction``; faster is not penalized."""
    d = np.asarray(direction, dtype=float)
    n = float(np.linalg.norm(d))
    if abs(n - 1.0) > 1e-6:
        raise ValueError(f"heading direction must be a unit vector (|d| = {n:.9g})")
    along = float(np.dot(np.asarray(com_vel, dtype=float), d))
    short = max(0.0, target_speed - along)
    return exp_kernel(short * short, scale)


def strike_reward(target, point, hit: bool, radius: float = 0.2, scale: float = 4.0):
    """Returns ``(reward, hit)``. Reward 1 once the point has come within ``radius`` of the target."""
    d2 = _vector_error_sq(point, target)
    if hit or math.sqrt(d2) <= radius:
        return 1.0, True
    return exp_kernel(d2, scale), False


def throw_reward(target, ball_pos, hit: bool, radius: float = 0.2, scale: float = 4.0):
    """Same objective as :func:`strike_reward`, tracking the ball instead of a link."""
    return strike_reward(target, ball_pos, hit, radius, scale)


def multi_clip_reward(per_clip) -> tuple[float, int]:
    """Best per-clip imitation reward and its index (lowest index on ties)."""
    r = np.asarray(per_clip, dtype=float)
    if r.size == 0:
        raise ValueError("multi_clip_reward needs at least one clip")
    i = int(np.argmax(r))  # argmax returns the first maximum
    return float(r[i]), i
