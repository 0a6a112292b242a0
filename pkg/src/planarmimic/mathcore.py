"""Rotation algebra and reward kernels.

Quaternions are plain ``numpy`` arrays in ``(w, x, y, z)`` order. Every
constructor returns a unit quaternion; every consumer checks the norm.
"""

from __future__ import annotations

import math

import numpy as np

UNIT_TOL = 1e-6


def normalize_angle(theta):
    """Wrap an angle (or array of angles) into (-pi, pi]."""
    wrapped = np.remainder(np.asarray(theta, dtype=float) + math.pi, 2.0 * math.pi) - math.pi
    # remainder maps +pi to -pi; the half-open interval is (-pi, pi]
    wrapped = np.where(wrapped <= -math.pi, wrapped + 2.0 * math.pi, wrapped)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


def _check_unit(q: np.ndarray, name: str = "q") -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (4,):
        raise ValueError(f"{name} must have shape (4,), got {q.shape}")
    norm = math.sqrt(float(q @ q))
    if abs(norm - 1.0) > UNIT_TOL:
        raise ValueError(f"{name} is not unit-norm (|{name}| = {norm:.9g})")
    return q


def quat(w: float, x: float, y: float, z: float) -> np.ndarray:
    """Build a quaternion and normalize it."""
    q = np.array([w, x, y, z], dtype=float)
    n = np.linalg.norm(q)
    if n < 1e-12:
        raise ValueError("cannot normalize a zero quaternion")
    return q / n


def identity() -> np.ndarray:
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_mul(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    """Hamilton product ``q1 * q2``."""
    w1, x1, y1, z1 = q1
    w2, x2, y2, z2 = q2
    return np.array([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ])


def quat_conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def _renormalize(q: np.ndarray) -> np.ndarray:
    return q / math.sqrt(float(q @ q))


def quat_diff(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    """Rotation taking ``q2`` to ``q1``, i.e. ``q1 * q2^-1``.

    Raises:
        ValueError: if either input deviates from unit norm by more than 1e-6.
    """
    q1 = _check_unit(q1, "q1")
    q2 = _check_unit(q2, "q2")
    return _renormalize(quat_mul(q1, quat_conj(q2)))


def quat_angle(q: np.ndarray) -> float:
    """Scalar rotation angle of ``q`` about its axis, in [0, pi].

    Uses ``2 atan2(|v|, |w|)`` so that ``q`` and ``-q`` give the same answer and
    the result stays accurate near 0 and pi.
    """
    q = _check_unit(q)
    vnorm = math.sqrt(q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    return 2.0 * math.atan2(vnorm, abs(q[0]))


def from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n < 1e-12:
        return identity()
    axis = axis / n
    half = 0.5 * angle
    return np.concatenate([[math.cos(half)], math.sin(half) * axis])


def from_rotvec(rotvec) -> np.ndarray:
    """Quaternion from an axis-angle vector (axis scaled by angle)."""
    rotvec = np.asarray(rotvec, dtype=float)
    angle = float(np.linalg.norm(rotvec))
    if angle < 1e-12:
        # first-order expansion keeps the map smooth through zero
        q = np.concatenate([[1.0], 0.5 * rotvec])
        return _renormalize(q)
    return from_axis_angle(rotvec / angle, angle)


def to_rotvec(q: np.ndarray) -> np.ndarray:
    """Axis-angle vector of ``q`` using the shortest representation."""
    q = _check_unit(q)
    if q[0] < 0.0:
        q = -q
    vnorm = float(np.linalg.norm(q[1:]))
    if vnorm < 1e-12:
        return 2.0 * q[1:]
    angle = 2.0 * math.atan2(vnorm, q[0])
    return q[1:] / vnorm * angle


def rz(angle: float) -> np.ndarray:
    return from_axis_angle((0.0, 0.0, 1.0), angle)


def rx(angle: float) -> np.ndarray:
    return from_axis_angle((1.0, 0.0, 0.0), angle)


def to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = _check_unit(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def slerp(q1: np.ndarray, q2: np.ndarray, t: float) -> np.ndarray:
    """Shortest-arc interpolation; ``t=0`` gives ``q1`` and ``t=1`` gives ``q2`` (up to sign)."""
    q1 = _check_unit(q1, "q1")
    q2 = _check_unit(q2, "q2")
    dot = float(q1 @ q2)
    if dot < 0.0:
        q2 = -q2
        dot = -dot
    if dot > 1.0 - 1e-12:
        return _renormalize(q1 + t * (q2 - q1))
    theta = math.acos(min(dot, 1.0))
    s = math.sin(theta)
    out = (math.sin((1.0 - t) * theta) / s) * q1 + (math.sin(t * theta) / s) * q2
    return _renormalize(out)


def exp_kernel(err_sq: float, scale: float) -> float:
    """``exp(-scale * err_sq)``, the shape shared by every tracking reward."""
    if err_sq < 0.0:
        raise ValueError(f"err_sq must be non-negative, got {err_sq}")
    if scale <= 0.0:
        raise ValueError(f"scale must be positive, got {scale}")
    return math.exp(-scale * err_sq)


def rot2(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])
