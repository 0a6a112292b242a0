"""Procedural authoring of hop clips for legged planar characters.

The center of mass follows a sinusoidal dip during stance and a ballistic arc
in flight, with take-off and landing velocities matched so the trajectory is
C1 and consistent with gravity. Leg angles come from a small Newton solve that
places the ankle and the whole-body COM; the torso stays upright and the foot
stays flat.
"""

from __future__ import annotations

import math

import numpy as np

from . import _kernels as K
from .charmodel import CharacterModel
from .motion import MotionClip


def _leg_slots(model: CharacterModel):
    """Joint indices of every (hip, knee, ankle) triple, matched by name suffix."""
    names = [j.name for j in model.joints]
    slots = {"hip": [], "knee": [], "ankle": []}
    for i, n in enumerate(names):
        for key in slots:
            if n == key or n.endswith("_" + key):
                slots[key].append(i)
    if not slots["hip"] or not (len(slots["hip"]) == len(slots["knee"]) == len(slots["ankle"])):
        raise ValueError(f"character '{model.name}' has no matching hip/knee/ankle joints")
    return slots


def _pose(model: CharacterModel, slots, hip: float, knee: float) -> np.ndarray:
    th = np.zeros(model.n_joints + 1)
    for i in slots["hip"]:
        th[1 + i] = hip
    for i in slots["knee"]:
        th[1 + i] = knee
    for i in slots["ankle"]:
        th[1 + i] = -(hip + knee)
    return th


def _com_minus_ankle(model: CharacterModel, slots, hip: float, knee: float) -> np.ndarray:
    arr = model.arrays
    th = _pose(model, slots, hip, knee)
    ang, org, pcom = K.relative_kinematics(arr.parent, arr.attach, arr.com, th)
    cx, cy, _ = K.com_offset(arr.mass, pcom)
    ankle = org[1 + slots["ankle"][0]]
    return np.array([cx - ankle[0], cy - ankle[1]])


def solve_leg(model: CharacterModel, com_rel_ankle, guess=(0.3, -0.6), tol: float = 1e-12):
    """Hip and knee angles that put the COM at ``com_rel_ankle`` relative to the ankle."""
    slots = _leg_slots(model)
    x = np.array(guess, dtype=float)
    target = np.asarray(com_rel_ankle, dtype=float)
    for _ in range(50):
        f = _com_minus_ankle(model, slots, *x) - target
        if np.max(np.abs(f)) < tol:
            return x
        J = np.empty((2, 2))
        eps = 1e-7
        for k in range(2):
            d = np.zeros(2)
            d[k] = eps
            J[:, k] = (_com_minus_ankle(model, slots, *(x + d)) - _com_minus_ankle(model, slots, *(x - d))) / (2 * eps)
        step = np.linalg.solve(J, -f)
        scale = min(1.0, 0.2 / max(np.max(np.abs(step)), 1e-300))
        x = x + scale * step
    raise RuntimeError(f"leg IK did not converge for target {target}")


def author_hop(model: CharacterModel, name: str = "hop", flight_time: float = 0.2,
               stance_time: float = 0.4, forward_speed: float = 0.0, clearance: float = 0.05,
               top_knee: float = -0.6, fps: int = 30, gravity: float = 9.81,
               ground: float = 0.0) -> MotionClip:
    """A looping hop clip starting at touchdown.

    ``forward_speed`` > 0 makes the character travel; each cycle then advances
    the root by ``forward_speed * cycle``. The foot lifts by ``clearance`` at
    mid-flight.
    """
    slots = _leg_slots(model)
    arr = model.arrays
    dt = 1.0 / fps
    n_stance = round(stance_time * fps)
    n_flight = round(flight_time * fps)
    if abs(n_stance * dt - stance_time) > 1e-9 or abs(n_flight * dt - flight_time) > 1e-9:
        raise ValueError("stance and flight durations must be whole numbers of frames")
    T = stance_time + flight_time
    v0 = gravity * flight_time / 2.0
    dip = v0 * stance_time / math.pi

    # foot geometry: sole height below the ankle and horizontal center of support
    foot = 1 + slots["ankle"][0]
    pts = arr.c_local[arr.c_link == foot]
    sole_drop = -float(pts[:, 1].min())
    support_x = float(pts[:, 0].mean())
    ankle_y0 = ground + sole_drop

    top = _com_minus_ankle(model, slots, -0.5 * top_knee, top_knee)
    y_top = ankle_y0 + top[1]
    stride = forward_speed * T

    frames = []
    guess = np.array([-0.5 * top_knee, top_knee])
    for f in range(n_stance + n_flight + 1):
        t = f * dt
        if t <= stance_time + 1e-12:
            s = t / stance_time
            ankle = np.array([0.0, ankle_y0])
            com = np.array([support_x + forward_speed * (t - 0.5 * stance_time),
                            y_top - dip * math.sin(math.pi * s)])
        else:
            s = (t - stance_time) / flight_time
            blend = s * s * (3.0 - 2.0 * s)
            ankle = np.array([stride * blend, ankle_y0 + clearance * 16.0 * s * s * (1.0 - s) ** 2])
            com = np.array([support_x + forward_speed * (t - 0.5 * stance_time),
                            y_top + v0 * flight_time * (s - s * s)])
        hip, knee = solve_leg(model, com - ankle, guess)
        guess = np.array([hip, knee])
        th = _pose(model, slots, hip, knee)
        ang, org, pcom = K.relative_kinematics(arr.parent, arr.attach, arr.com, th)
        root = ankle - org[foot]
        frames.append([root[0], root[1], 0.0] + list(th[1:]))
    frames = np.array(frames)
    # the last frame repeats the first pose one stride ahead; make the joints match exactly
    frames[-1, 2:] = frames[0, 2:]
    frames[-1, :2] = frames[0, :2] + np.array([stride, 0.0])
    joints = [(j.name, j.kind) for j in model.joints]
    return MotionClip(name, True, dt, joints, frames)
