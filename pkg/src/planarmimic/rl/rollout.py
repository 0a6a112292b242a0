"""Episode collection.

Environments expose ``obs_dim``, ``action_dim``, ``horizon_steps``,
``max_step_reward``, ``reset(rng, mode) -> obs`` with ``mode`` in
``{'rsi', 'fixed'}``, ``step(action) -> (obs, reward, fell, truncated, info)``
and ``clone()``. ``fell`` reports a termination-link ground contact; whether it
ends the episode is decided here by the early-termination setting.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..physics import SimulationDiverged

log = logging.getLogger(__name__)


@dataclass
class Episode:
    obs: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    rewards: np.ndarray
    final_obs: np.ndarray
    terminated: bool
    start_phase: float = 0.0

    @property
    def length(self) -> int:
        return int(self.rewards.shape[0])


@dataclass
class RolloutBatch:
    episodes: list = field(default_factory=list)
    diverged: int = 0

    @property
    def n_steps(self) -> int:
        return sum(ep.length for ep in self.episodes)

    def concat(self, name: str) -> np.ndarray:
        return np.concatenate([getattr(ep, name) for ep in self.episodes])


def run_episode(env, policy, rng: np.random.Generator, mode: str, early_termination: bool,
                deterministic: bool = False, record_info: bool = False):
    """Run one episode; returns an :class:`Episode` and, optionally, the per-step info dicts.

    Raises :class:`SimulationDiverged` if the simulation blows up.
    """
    obs = env.reset(rng, mode)
    start_phase = float(getattr(env, "phase", 0.0))
    H = env.horizon_steps
    O = np.empty((H, obs.shape[0]))
    A = np.empty((H, env.action_dim))
    LP = np.empty(H)
    R = np.empty(H)
    infos = []
    terminated = False
    t = 0
    while t < H:
        if deterministic:
            a = policy.forward_mean(obs)
            lp = float(policy.log_prob_from_mean(a, a))
        else:
            a, lp = policy.sample_action(obs, rng)
            lp = float(lp)
        O[t] = obs
        A[t] = a
        LP[t] = lp
        obs, r, fell, truncated, info = env.step(a)
        R[t] = r
        if record_info:
            infos.append(info)
        t += 1
        if fell and early_termination:
            terminated = True
            break
        if truncated:
            break
    ep = Episode(O[:t].copy(), A[:t].copy(), LP[:t].copy(), R[:t].copy(), obs.copy(), terminated, start_phase)
    return (ep, infos) if record_info else ep


def _collect_stream(env, policy, rng, n_steps: int, mode: str, early_termination: bool):
    batch = RolloutBatch()
    while batch.n_steps < n_steps:
        try:
            ep = run_episode(env, policy, rng, mode, early_termination)
        except SimulationDiverged as exc:
            batch.diverged += 1
            log.warning("discarding diverged episode (%s)", exc)
            if batch.diverged > 1000:
                raise
            continue
        batch.episodes.append(ep)
    return batch


def collect_rollouts(env, policy, config, rng: np.random.Generator) -> RolloutBatch:
    """Gather at least ``config.batch_size`` steps, finishing the episode in progress.

    With ``config.workers > 1`` each worker gets its own environment copy and
    random stream and collects an equal share; batches are merged in worker
    order, so the result depends only on the seed and worker count.
    """
    mode = "rsi" if config.rsi else "fixed"
    if config.workers == 1:
        return _collect_stream(env, policy, rng, config.batch_size, mode, config.early_termination)
    share = -(-config.batch_size // config.workers)
    seeds = rng.integers(0, 2 ** 63 - 1, size=config.workers)
    merged = RolloutBatch()
    for w in range(config.workers):
        part = _collect_stream(env.clone(), policy, np.random.default_rng(int(seeds[w])), share, mode,
                               config.early_termination)
        merged.episodes.extend(part.episodes)
        merged.diverged += part.diverged
    return merged
