"""Environments: motion imitation (optionally with a task or skill selection) and
two small control benchmarks used as learning sanity checks.

All environments follow the interface described in :mod:`planarmimic.rl.rollout`.
"""

from __future__ import annotations

import copy
import math
from typing import Optional, Sequence

import numpy as np

from . import _kernels as K
from . import rewards as R
from .charmodel import (CharacterModel, HeadingGoal, SkillGoal, StrikeGoal, build_pendulum,
                        decode_action, featurize)
from .motion import MotionClip, check_equal_cycles, reference_state, sample_reference_state
from .physics import SimConfig, advance, check_termination, link_states, make_state

TASKS = (None, "heading", "strike")
ACTION_MODES = ("absolute", "offset")


class ImitationEnv:
    """Track one or more reference clips with a simulated character.

    With several clips and ``skill_selector=False`` the imitation reward is the
    best match over all clips. With ``skill_selector=True`` a one-hot goal
    names the clip to imitate and is resampled at every cycle boundary.
    """

    def __init__(self, model: CharacterModel, clips: Sequence[MotionClip],
                 sim_config: SimConfig = SimConfig(), weights: R.RewardWeights = R.DEFAULT_WEIGHTS,
                 horizon: float = 20.0, task: Optional[str] = None, action_mode: str = "absolute",
                 skill_selector: bool = False, strike_link: Optional[str] = None,
                 strike_distance=(0.6, 0.8), strike_height=(0.8, 1.25)):
        clips = list(clips)
        if not clips:
            raise ValueError("at least one clip is required")
        names = tuple(j.name for j in model.joints)
        for c in clips:
            if c.joint_names != names:
                raise ValueError(f"clip '{c.name}' joints {c.joint_names} do not match character joints {names}")
        if len(clips) > 1:
            check_equal_cycles(clips)
        if task not in TASKS:
            raise ValueError(f"unknown task '{task}'")
        if action_mode not in ACTION_MODES:
            raise ValueError(f"unknown action mode '{action_mode}'")
        if task is not None and skill_selector:
            raise ValueError("a task and the skill selector cannot be combined")
        self.model = model
        self.clips = clips
        self.sim_config = sim_config
        self.weights = weights
        self.task = task
        self.action_mode = action_mode
        self.skill_selector = skill_selector
        self.strike_link = model.link_index(strike_link) if strike_link else int(model.end_effector_ids[0])
        self.strike_distance = strike_distance
        self.strike_height = strike_height
        T = clips[0].cycle_duration
        seconds = horizon if clips[0].loop else T
        self.horizon_steps = int(round(seconds * sim_config.control_rate))
        self.max_step_reward = R.max_step_reward(weights, has_task=task is not None)
        self.action_dim = model.action_dim
        self.obs_dim = model.feature_dim + self._goal_dim()
        self.active = 0
        self.state = None
        self.rng = None

    def _goal_dim(self) -> int:
        if self.skill_selector:
            return len(self.clips)
        return {None: 0, "heading": 2, "strike": 3}[self.task]

    def clone(self) -> "ImitationEnv":
        other = copy.copy(self)
        other.state = None
        other.rng = None
        return other

    # ------------------------------------------------------------------

    @property
    def clip(self) -> MotionClip:
        return self.clips[self.active]

    def reset(self, rng: np.random.Generator, mode: str = "rsi") -> np.ndarray:
        self.rng = rng
        self.active = int(rng.integers(len(self.clips))) if len(self.clips) > 1 else 0
        ref = sample_reference_state(self.clip, mode, rng)
        self.phase = ref.phase
        self.ref_origin = np.zeros(2)
        self.steps = 0
        self.state = make_state(self.model, ref.root_pos, ref.root_rot, ref.joints, ref.root_vel,
                                ref.root_omega, ref.joint_vel)
        self._new_cycle_goal()
        return self._obs()

    def _new_cycle_goal(self):
        self.hit = False
        if self.skill_selector:
            one = np.zeros(len(self.clips))
            one[self.active] = 1.0
            self.goal = SkillGoal(tuple(one))
        elif self.task == "heading":
            self.goal = HeadingGoal((1.0, 0.0) if self.rng.random() < 0.5 else (-1.0, 0.0))
        elif self.task == "strike":
            origin = self._root_origin()
            side = 1.0 if self.rng.random() < 0.5 else -1.0
            dist = self.rng.uniform(*self.strike_distance)
            height = self.rng.uniform(*self.strike_height)
            self.goal = StrikeGoal((origin[0] + side * dist, self.sim_config.ground_height + height), 0)
        else:
            self.goal = None

    def _root_origin(self):
        return link_states(self.model, self.state.q, self.state.qd)[4]

    def _obs(self) -> np.ndarray:
        return featurize(self.model, self.state, self.phase, self.goal, self.sim_config.ground_height)

    def reference_targets(self, phase: float, clip: Optional[MotionClip] = None) -> np.ndarray:
        return reference_state(clip or self.clip, phase).joints

    def _reference_kinematics(self, clip: MotionClip, phase: float):
        ref = reference_state(clip, phase)
        arr = self.model.arrays
        th = np.concatenate([[ref.root_rot], ref.joints])
        thd = np.concatenate([[ref.root_omega], ref.joint_vel])
        root = ref.root_pos + self.ref_origin
        q, qd = K.root_to_generalized(root[0], root[1], ref.root_vel[0], ref.root_vel[1], th, thd,
                                      arr.parent, arr.anc, arr.attach, arr.com, arr.mass, arr.floating)
        pos = K.link_states(q, qd, arr.parent, arr.anc, arr.attach, arr.com, arr.mass, arr.floating)[0]
        com = arr.mass @ pos / arr.mass.sum()
        return th, thd, pos[self.model.end_effector_ids], com

    def imitation_terms(self, clip: MotionClip, phase: float, pos=None):
        """The four imitation terms of the current sim state against ``clip`` at ``phase``."""
        w = self.weights
        th, thd, ee, com = self._reference_kinematics(clip, phase)
        if pos is None:
            pos = link_states(self.model, self.state.q, self.state.qd)[0]
        mass = self.model.arrays.mass
        sim_com = mass @ pos / mass.sum()
        return (
            R.pose_reward(self.state.q[2:], th, w.pose_scale),
            R.velocity_reward(self.state.qd[2:], thd, w.velocity_scale),
            R.end_effector_reward(pos[self.model.end_effector_ids], ee, w.end_effector_scale),
            R.com_reward(sim_com, com, w.com_scale),
        )

    def step(self, action):
        clip = self.clip
        dt = self.sim_config.control_dt
        nxt = self.phase + dt / clip.cycle_duration
        wrapped = clip.loop and nxt >= 1.0 - 1e-9
        new_phase = (nxt - 1.0 if wrapped else nxt) if clip.loop else min(nxt, 1.0)
        new_phase = max(new_phase, 0.0)
        a = np.asarray(action, dtype=float)
        if self.action_mode == "offset":
            ref_phase = 1.0 if wrapped else new_phase
            a = a + self.reference_targets(ref_phase, clip)
        targets = decode_action(self.model, a)
        advance(self.model, self.state, targets, self.sim_config)
        self.steps += 1
        if wrapped:
            self.ref_origin = self.ref_origin + clip.cycle_offset
        self.phase = new_phase

        pos, vel, *_ = link_states(self.model, self.state.q, self.state.qd)
        info = {"phase": self.phase, "skill": self.active, "q": self.state.q.copy(), "qd": self.state.qd.copy()}
        if len(self.clips) > 1 and not self.skill_selector:
            per_clip = [self.imitation_terms(c, self.phase, pos) for c in self.clips]
            rs = [R.imitation_reward(t, self.weights) for t in per_clip]
            r_i, best = R.multi_clip_reward(rs)
            terms = per_clip[best]
        else:
            terms = self.imitation_terms(clip, self.phase, pos)
            r_i, best = R.imitation_reward(terms, self.weights), self.active
        info["terms"] = terms
        info["imitation"] = r_i
        info["clip"] = best
        r_g = None
        if self.task == "heading":
            mass = self.model.arrays.mass
            com_vel = mass @ vel / mass.sum()
            r_g = R.heading_reward(com_vel, self.goal.direction, self.weights.target_speed,
                                   self.weights.heading_scale)
        elif self.task == "strike":
            r_g, hit = R.strike_reward(self.goal.target, pos[self.strike_link], self.hit,
                                       self.weights.hit_radius, self.weights.strike_scale)
            if hit and not self.hit:
                self.hit = True
                self.goal = StrikeGoal(self.goal.target, 1)
        info["task"] = r_g
        reward = R.combined_reward(r_i, r_g, self.weights)

        if wrapped:
            if self.skill_selector:
                self.active = int(self.rng.integers(len(self.clips)))
            if self.task is not None or self.skill_selector:
                self._new_cycle_goal()
        fell = check_termination(self.model, self.state)
        truncated = self.steps >= self.horizon_steps
        return self._obs(), reward, fell, truncated, info


class PointMassEnv:
    """A unit point mass in the plane driven by a PD servo toward the action setpoint.

    The goal is a random target; reward ``exp(-scale * |p - target|^2)``.
    Observations are position, velocity and target offset.
    """

    def __init__(self, horizon: float = 5.0, control_rate: int = 30, substeps: int = 10,
                 kp: float = 100.0, kd: float = 20.0, scale: float = 2.0, extent: float = 1.0):
        self.control_rate = control_rate
        self.substeps = substeps
        self.kp, self.kd, self.scale, self.extent = kp, kd, scale, extent
        self.horizon_steps = int(round(horizon * control_rate))
        self.max_step_reward = 1.0
        self.obs_dim = 6
        self.action_dim = 2

    def clone(self) -> "PointMassEnv":
        return copy.copy(self)

    def reset(self, rng: np.random.Generator, mode: str = "rsi") -> np.ndarray:
        e = self.extent
        self.target = rng.uniform(-e, e, size=2)
        self.pos = rng.uniform(-e, e, size=2) if mode == "rsi" else np.zeros(2)
        self.vel = np.zeros(2)
        self.steps = 0
        return self._obs()

    def _obs(self):
        return np.concatenate([self.pos, self.vel, self.target - self.pos])

    def step(self, action):
        a = np.clip(np.asarray(action, dtype=float), -2.0 * self.extent, 2.0 * self.extent)
        h = 1.0 / (self.control_rate * self.substeps)
        for _ in range(self.substeps):
            acc = self.kp * (a - self.pos) - self.kd * self.vel
            self.vel = self.vel + h * acc
            self.pos = self.pos + h * self.vel
        self.steps += 1
        d2 = float(np.sum((self.pos - self.target) ** 2))
        r = math.exp(-self.scale * d2)
        return self._obs(), r, False, self.steps >= self.horizon_steps, {}


class PendulumSwingUpEnv:
    """Torque-limited pendulum on a fixed base; the action is a stable-PD target angle.

    Reward ``(1 - cos theta) / 2`` is 1 upright and 0 hanging. ``rsi`` resets
    draw a random angle and rate, ``fixed`` resets start hanging at rest.
    """

    def __init__(self, horizon: float = 10.0, sim_config: SimConfig = SimConfig(),
                 torque_limit: float = 2.5, kp: float = 5.0, kd: float = 0.1):
        self.model = build_pendulum(torque_limit=torque_limit, kp=kp, kd=kd)
        self.sim_config = sim_config
        self.horizon_steps = int(round(horizon * sim_config.control_rate))
        self.max_step_reward = 1.0
        self.obs_dim = 3
        self.action_dim = 1

    def clone(self) -> "PendulumSwingUpEnv":
        other = copy.copy(self)
        other.state = None
        return other

    def reset(self, rng: np.random.Generator, mode: str = "rsi") -> np.ndarray:
        if mode == "rsi":
            th = rng.uniform(-math.pi, math.pi)
            thd = rng.uniform(-1.0, 1.0)
        else:
            th, thd = 0.0, 0.0
        self.state = make_state(self.model, joints=[th], joint_vel=[thd])
        self.steps = 0
        return self._obs()

    def _obs(self):
        th, thd = self.state.q[3], self.state.qd[3]
        return np.array([math.sin(th), math.cos(th), 0.1 * thd])

    def step(self, action):
        targets = decode_action(self.model, np.asarray(action, dtype=float) + self.state.q[3:])
        advance(self.model, self.state, targets, self.sim_config)
        self.steps += 1
        r = 0.5 * (1.0 - math.cos(self.state.q[3]))
        return self._obs(), r, False, self.steps >= self.horizon_steps, {}
