"""Clipped-surrogate policy updates with a TD(lambda)-fitted value function."""

from __future__ import annotations

import numpy as np

from .returns import targets_and_advantages


class UpdateAborted(FloatingPointError):
    """A non-finite loss or gradient was met; parameters were restored."""


def clipped_surrogate(w, adv, eps: float):
    """``min(w A, clip(w, 1-eps, 1+eps) A)`` and its derivative with respect to ``w``.

    The derivative is exactly zero whenever the clipped branch is the active
    minimum and ``w`` lies outside ``[1-eps, 1+eps]``.
    """
    w = np.asarray(w, dtype=float)
    adv = np.asarray(adv, dtype=float)
    clipped_w = np.clip(w, 1.0 - eps, 1.0 + eps)
    unclipped = w * adv
    clipped = clipped_w * adv
    value = np.minimum(unclipped, clipped)
    inside = (w >= 1.0 - eps) & (w <= 1.0 + eps)
    grad = np.where((unclipped <= clipped) | inside, adv, 0.0)
    if value.ndim == 0:
        return float(value), float(grad)
    return value, grad


def surrogate_and_grad(policy, obs, actions, lp_old, adv, eps: float):
    """Mean clipped surrogate over a minibatch and its gradient w.r.t. the policy parameters.

    Returns ``(objective, grads, ratios)``.
    """
    mu, cache = policy.net.forward_cache(policy._inp(obs))
    lp = policy.log_prob_from_mean(mu, actions)
    w = np.exp(lp - lp_old)
    val, dw = clipped_surrogate(w, adv, eps)
    n = obs.shape[0]
    coeff = dw * w / n
    dmu = (actions - mu) / (policy.sigma ** 2) * coeff[:, None]
    return float(np.mean(val)), policy.net.backward(cache, dmu), w


def value_loss_and_step(value_net, obs, targets):
    """``0.5 mean (y - V)^2`` and the ascent direction ``mean grad V (y - V)``."""
    out, cache = value_net.net.forward_cache(value_net._inp(obs))
    v = out[:, 0] * value_net.output_scale
    err = targets - v
    n = obs.shape[0]
    up = (err / n * value_net.output_scale)[:, None]
    return 0.5 * float(np.mean(err * err)), value_net.net.backward(cache, up)


def _finite(grads) -> bool:
    return all(np.all(np.isfinite(g)) for g in grads)


def ppo_update(batch, policy, value_net, policy_opt, value_opt, config, rng: np.random.Generator) -> dict:
    """One batch of updates (``config.epochs`` shuffled passes of minibatches).

    Value targets and advantages are computed once, before any parameter
    changes. Each minibatch takes a value step then a policy step. On a
    non-finite loss or gradient all parameters and optimizer state are
    restored and :class:`UpdateAborted` is raised.
    """
    obs = batch.concat("obs")
    actions = batch.concat("actions")
    lp_old = batch.concat("log_probs")
    targets, adv = targets_and_advantages(batch, value_net, config.gamma, config.lam)
    if config.advantage_norm and adv.size > 1:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)

    saved = ([p.copy() for p in policy.net.params], [p.copy() for p in value_net.net.params],
             [v.copy() for v in policy_opt.velocity], [v.copy() for v in value_opt.velocity])

    def restore():
        for dst, src in zip(policy.net.params, saved[0]):
            dst[...] = src
        for dst, src in zip(value_net.net.params, saved[1]):
            dst[...] = src
        for dst, src in zip(policy_opt.velocity, saved[2]):
            dst[...] = src
        for dst, src in zip(value_opt.velocity, saved[3]):
            dst[...] = src

    N = obs.shape[0]
    n = config.minibatch_size
    ratios, clipped, pl, vl = [], 0, [], []
    first_ratios = None
    for _ in range(config.epochs):
        perm = rng.permutation(N)
        for start in range(0, N, n):
            idx = perm[start:start + n]
            loss_v, g_v = value_loss_and_step(value_net, obs[idx], targets[idx])
            if not (np.isfinite(loss_v) and _finite(g_v)):
                restore()
                raise UpdateAborted("non-finite value loss or gradient")
            value_opt.step(value_net.net.params, g_v)
            obj, g_p, w = surrogate_and_grad(policy, obs[idx], actions[idx], lp_old[idx], adv[idx],
                                             config.clip_eps)
            if not (np.isfinite(obj) and _finite(g_p)):
                restore()
                raise UpdateAborted("non-finite policy objective or gradient")
            policy_opt.step(policy.net.params, g_p)
            if first_ratios is None:
                first_ratios = w
            ratios.append(w)
            clipped += int(np.sum(np.abs(w - 1.0) > config.clip_eps))
            pl.append(-obj)
            vl.append(loss_v)
    allw = np.concatenate(ratios) if ratios else np.ones(0)
    return {
        "mean_ratio": float(allw.mean()) if allw.size else 1.0,
        "clip_fraction": clipped / max(allw.size, 1),
        "policy_loss": float(np.mean(pl)) if pl else 0.0,
        "value_loss": float(np.mean(vl)) if vl else 0.0,
        "first_ratios": first_ratios,
        "n_samples": N,
    }
