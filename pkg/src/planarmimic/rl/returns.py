"""n-step returns, lambda-returns and generalized advantages.

Per episode, ``rewards`` has length ``T`` and ``values`` length ``T + 1``;
``values[T]`` is the bootstrap value of the final state, 0 when the episode
ended by termination.
"""

from __future__ import annotations

import numpy as np


def _check(rewards, values):
    r = np.asarray(rewards, dtype=float)
    v = np.asarray(values, dtype=float)
    if v.shape != (r.shape[0] + 1,):
        raise ValueError(f"values must have length len(rewards) + 1 ({r.shape[0] + 1}), got {v.shape}")
    return r, v


def n_step_return(rewards, values, gamma: float, t: int, n: int) -> float:
    """``sum_{l<n} gamma^l r_{t+l} + gamma^n V(s_{t+n})``, truncated at the episode end."""
    r, v = _check(rewards, values)
    T = r.shape[0]
    if not 0 <= t < T:
        raise ValueError(f"t={t} outside episode of length {T}")
    if n < 1:
        raise ValueError("n must be at least 1")
    steps = min(n, T - t)
    out = 0.0
    disc = 1.0
    for k in range(steps):
        out += disc * r[t + k]
        disc *= gamma
    return out + disc * v[t + steps]


def lambda_return(rewards, values, gamma: float, lam: float, t: int) -> float:
    """Exponentially weighted average of the n-step returns from ``t``, in finite-sum form."""
    r, v = _check(rewards, values)
    T = r.shape[0]
    remaining = T - t
    out = 0.0
    for n in range(1, remaining):
        out += (1.0 - lam) * lam ** (n - 1) * n_step_return(r, v, gamma, t, n)
    return out + lam ** (remaining - 1) * n_step_return(r, v, gamma, t, remaining)


def lambda_returns(rewards, values, gamma: float, lam: float) -> np.ndarray:
    """All lambda-returns of an episode via ``G_t = r_t + gamma((1-lam) V_{t+1} + lam G_{t+1})``."""
    r, v = _check(rewards, values)
    T = r.shape[0]
    out = np.empty(T)
    g = v[T]
    for t in range(T - 1, -1, -1):
        g = r[t] + gamma * ((1.0 - lam) * v[t + 1] + lam * g)
        out[t] = g
    return out


def episode_values(episode, value_net) -> np.ndarray:
    """Value estimates along an episode plus the bootstrap entry."""
    v = np.empty(episode.length + 1)
    if episode.length:
        v[:-1] = value_net.value(episode.obs)
    v[-1] = 0.0 if episode.terminated else float(value_net.value(episode.final_obs[None, :])[0])
    return v


def compute_value_targets(batch, value_net, gamma: float, lam: float) -> np.ndarray:
    """TD(lambda) targets for every step of every episode, concatenated in episode order."""
    parts = [lambda_returns(ep.rewards, episode_values(ep, value_net), gamma, lam) for ep in batch.episodes]
    return np.concatenate(parts) if parts else np.zeros(0)


def compute_gae(batch, value_net, gamma: float, lam: float) -> np.ndarray:
    """GAE(lambda) advantages, ``lambda-return - V(s_t)``, concatenated in episode order."""
    parts = []
    for ep in batch.episodes:
        v = episode_values(ep, value_net)
        parts.append(lambda_returns(ep.rewards, v, gamma, lam) - v[:-1])
    return np.concatenate(parts) if parts else np.zeros(0)


def targets_and_advantages(batch, value_net, gamma: float, lam: float):
    """Both quantities from a single pass of value evaluations."""
    ys, advs = [], []
    for ep in batch.episodes:
        v = episode_values(ep, value_net)
        y = lambda_returns(ep.rewards, v, gamma, lam)
        ys.append(y)
        advs.append(y - v[:-1])
    if not ys:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(ys), np.concatenate(advs)
