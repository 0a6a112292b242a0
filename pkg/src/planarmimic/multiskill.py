"""Combining skills: one-hot skill selection and value-weighted composite control."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .charmodel import CharacterModel, decode_action, featurize
from .motion import MotionClip, check_equal_cycles, reference_state
from .physics import SimConfig, SimState, advance


def selector_goal(index: int, k: int) -> np.ndarray:
    """One-hot vector of length ``k`` selecting skill ``index``."""
    if k < 1:
        raise ValueError("need at least one skill")
    if not 0 <= index < k:
        raise ValueError(f"skill index {index} out of range for {k} skills")
    g = np.zeros(k)
    g[index] = 1.0
    return g


def selector_reward(active: int, per_clip_rewards) -> float:
    """Imitation reward of the selected clip; the other clips play no part."""
    r = np.asarray(per_clip_rewards, dtype=float)
    if not 0 <= active < r.shape[0]:
        raise ValueError(f"skill index {active} out of range for {r.shape[0]} clips")
    return float(r[active])


def boltzmann_weights(values, temperature: float) -> np.ndarray:
    """``softmax(values / temperature)``, computed with the maximum subtracted first."""
    if not temperature > 0.0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("empty value set")
    z = (v - v.max()) / temperature
    e = np.exp(z)
    return e / e.sum()


def normalize_values(values, lo: float = -1.0, hi: float = 1.0) -> np.ndarray:
    """Affine map of (min, max) onto (lo, hi); an all-equal set maps to the interval midpoint."""
    v = np.asarray(values, dtype=float)
    vmin, vmax = v.min(), v.max()
    if vmax - vmin <= 0.0:
        return np.full(v.shape, 0.5 * (lo + hi))
    return lo + (hi - lo) * (v - vmin) / (vmax - vmin)


@dataclass(frozen=True)
class CompositeConfig:
    temperature: float = 0.3
    value_range: tuple = (-1.0, 1.0)
    no_repeat: bool = True

    def __post_init__(self):
        if not self.temperature > 0.0:
            raise ValueError("temperature must be positive")
        if not self.value_range[0] < self.value_range[1]:
            raise ValueError("value_range must be increasing")


@dataclass
class Skill:
    clip: MotionClip
    policy: object = None
    value: object = None
    action_mode: str = "absolute"


class SkillSet:
    """Ordered skills; ``require_equal_cycles`` enforces one shared cycle duration."""

    def __init__(self, skills: Sequence[Skill], require_equal_cycles: bool = False):
        self.skills = list(skills)
        if require_equal_cycles and self.skills:
            check_equal_cycles(s.clip for s in self.skills)

    def __len__(self) -> int:
        return len(self.skills)

    def __getitem__(self, i) -> Skill:
        return self.skills[i]


def composite_probabilities(values, config: CompositeConfig, previous: Optional[int] = None) -> np.ndarray:
    norm = normalize_values(values, *config.value_range)
    p = boltzmann_weights(norm, config.temperature)
    if config.no_repeat and previous is not None:
        p = p.copy()
        p[previous] = 0.0
        total = p.sum()
        if not total > 0.0:
            raise ValueError("no skill left to choose: the only candidate is excluded by the no-repeat rule")
        p /= total
    return p


def skill_values(skills: SkillSet, model: CharacterModel, state: SimState, ground: float = 0.0) -> np.ndarray:
    """Each skill's value estimate of ``state``, with the phase set to 0 for every candidate."""
    feats = featurize(model, state, 0.0, None, ground)
    return np.array([float(s.value.value(feats[None, :])[0]) for s in skills.skills])


def composite_select(skills: SkillSet, model: CharacterModel, state: SimState, config: CompositeConfig,
                     rng: np.random.Generator, previous: Optional[int] = None, ground: float = 0.0):
    """Sample the next skill. Returns ``(index, values, normalized values, probabilities)``."""
    if len(skills) == 0:
        raise ValueError("empty skill set")
    if config.no_repeat and previous is not None and len(skills) == 1:
        raise ValueError("no-repeat composite control needs at least two skills")
    values = skill_values(skills, model, state, ground)
    p = composite_probabilities(values, config, previous)
    idx = int(rng.choice(len(p), p=p))
    return idx, values, normalize_values(values, *config.value_range), p


def run_composite(skills: SkillSet, model: CharacterModel, state: SimState, sim_config: SimConfig,
                  config: CompositeConfig, rng: np.random.Generator, n_cycles: int):
    """Run the composite controller for ``n_cycles`` full cycles from ``state`` (modified in place).

    A new skill is drawn at each cycle start and executed, with deterministic
    actions, for a whole cycle. Returns the per-cycle log rows.
    """
    rows = []
    previous = None
    for cycle in range(n_cycles):
        idx, values, norm, p = composite_select(skills, model, state, config, rng, previous,
                                                sim_config.ground_height)
        rows.append({"cycle": cycle, "skill": idx, "normalized_values": norm.tolist(),
                     "probabilities": p.tolist()})
        skill = skills[idx]
        steps = int(round(skill.clip.cycle_duration * sim_config.control_rate))
        phase = 0.0
        for _ in range(steps):
            obs = featurize(model, state, phase, None, sim_config.ground_height)
            a = skill.policy.forward_mean(obs)
            phase = min(phase + sim_config.control_dt / skill.clip.cycle_duration, 1.0)
            if skill.action_mode == "offset":
                a = a + reference_state(skill.clip, phase).joints
            advance(model, state, decode_action(model, a), sim_config)
        previous = idx
    return rows


def composite_log_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cycle", "skill", "normalized_values", "probabilities"])
    for r in rows:
        w.writerow([r["cycle"], r["skill"], " ".join(repr(float(x)) for x in r["normalized_values"]),
                    " ".join(repr(float(x)) for x in r["probabilities"])])
    return buf.getvalue()
