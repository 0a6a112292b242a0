"""Central finite-difference gradients, used as the reference for analytic backprop."""

import numpy as np

from planarmimic.nets import GaussianPolicy, Mlp, ValueNet
from planarmimic.rl.ppo import surrogate_and_grad, value_loss_and_step

H = 1e-6


def fd_grads(params, f, h=H):
    """Gradient of the scalar ``f()`` w.r.t. every entry of every array in ``params``."""
    out = []
    for p in params:
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            fp = f()
            p[idx] = old - h
            fm = f()
            p[idx] = old
            g[idx] = (fp - fm) / (2.0 * h)
        out.append(g)
    return out


def rel_error(analytic, numeric) -> float:
    a = np.concatenate([np.ravel(x) for x in analytic])
    n = np.concatenate([np.ravel(x) for x in numeric])
    scale = max(np.linalg.norm(a), np.linalg.norm(n), 1e-300)
    return float(np.linalg.norm(a - n) / scale)


def random_net(rng, max_width=64):
    in_dim = int(rng.integers(2, 9))
    depth = int(rng.integers(1, 3))
    hidden = tuple(int(rng.integers(2, max_width + 1)) for _ in range(depth))
    return in_dim, hidden


def _randomize_biases(net, rng):
    # zero biases put pre-activations exactly on the ReLU kink whenever a whole
    # layer is inactive; finite differences are meaningless there
    for b in net.biases:
        b[...] = rng.normal(scale=0.5, size=b.shape)
    return net


def _small_width(rng):
    # most instances stay small so exhaustive finite differences are cheap;
    # every tenth one uses the full 64-unit width
    return 64 if rng.random() < 0.1 else 16


def policy_logprob_instance(rng):
    in_dim, hidden = random_net(rng, _small_width(rng))
    act = int(rng.integers(1, 4))
    policy = GaussianPolicy(_randomize_biases(Mlp(in_dim, hidden, act, rng), rng), rng.uniform(0.1, 1.0, size=act))
    B = 6
    x = rng.normal(size=(B, in_dim))
    a = policy.forward_mean(x) + rng.normal(scale=0.3, size=(B, act))
    coeff = rng.normal(size=B)
    grads, _ = policy.log_prob_grad(x, a, coeff)
    numeric = fd_grads(policy.net.params, lambda: float(np.sum(coeff * policy.log_prob(x, a))))
    return rel_error(grads, numeric)


def value_instance(rng):
    in_dim, hidden = random_net(rng, _small_width(rng))
    value = ValueNet(_randomize_biases(Mlp(in_dim, hidden, 1, rng), rng), output_scale=rng.uniform(0.5, 2.0))
    B = 6
    x = rng.normal(size=(B, in_dim))
    y = rng.normal(size=B)
    _, ascent = value_loss_and_step(value, x, y)
    # the ascent direction is minus the gradient of the loss 0.5 mean (y - V)^2
    numeric = fd_grads(value.net.params, lambda: -0.5 * float(np.mean((y - value.value(x)) ** 2)))
    coeff = rng.normal(size=B)
    g2, _ = value.value_grad(x, coeff)
    numeric2 = fd_grads(value.net.params, lambda: float(np.sum(coeff * value.value(x))))
    return max(rel_error(ascent, numeric), rel_error(g2, numeric2))


def surrogate_instance(rng, eps=0.2):
    """Returns ``(relative error, number of samples on a clipped, zero-gradient branch)``."""
    in_dim, hidden = random_net(rng, _small_width(rng))
    act = int(rng.integers(1, 4))
    policy = GaussianPolicy(_randomize_biases(Mlp(in_dim, hidden, act, rng), rng), rng.uniform(0.2, 1.0, size=act))
    B = 8
    x = rng.normal(size=(B, in_dim))
    a = policy.forward_mean(x) + rng.normal(scale=0.3, size=(B, act))
    lp_now = policy.log_prob(x, a)
    lp_old = lp_now - rng.uniform(-0.5, 0.5, size=B)  # ratios spread over roughly [0.6, 1.65]
    adv = rng.normal(size=B)
    _, grads, w = surrogate_and_grad(policy, x, a, lp_old, adv, eps)

    def objective():
        lp = policy.log_prob(x, a)
        r = np.exp(lp - lp_old)
        return float(np.mean(np.minimum(r * adv, np.clip(r, 1 - eps, 1 + eps) * adv)))

    numeric = fd_grads(policy.net.params, objective)
    clipped = int(np.sum(((w > 1 + eps) & (adv > 0)) | ((w < 1 - eps) & (adv < 0))))
    return rel_error(grads, numeric), clipped
