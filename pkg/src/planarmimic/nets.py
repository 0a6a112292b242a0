"""Multilayer perceptrons with hand-written backpropagation, a fixed-variance Gaussian
policy, a value network, momentum SGD and a deterministic checkpoint format.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

LOG_2PI = math.log(2.0 * math.pi)


class Mlp:
    """Fully connected network: ReLU hidden layers and a linear output layer.

    Weights are stored as ``(fan_in, fan_out)`` so a batch ``x`` of shape
    ``(B, in)`` maps through ``x @ W + b``. The ReLU derivative at exactly 0
    is taken to be 0.
    """

    def __init__(self, in_dim: int, hidden, out_dim: int, rng: Optional[np.random.Generator] = None,
                 output_scale: float = 1.0):
        hidden = tuple(int(h) for h in hidden)
        if in_dim <= 0 or out_dim <= 0 or any(h <= 0 for h in hidden):
            raise ValueError(f"layer widths must be positive: {in_dim}, {hidden}, {out_dim}")
        self.sizes = (int(in_dim),) + hidden + (int(out_dim),)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        rng = rng if rng is not None else np.random.default_rng(0)
        n_layers = len(self.sizes) - 1
        for i, (a, b) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            bound = 1.0 / math.sqrt(a)
            W = rng.uniform(-bound, bound, size=(a, b))
            if i == n_layers - 1:
                W *= output_scale
            self.weights.append(W)
            self.biases.append(np.zeros(b))

    @property
    def in_dim(self) -> int:
        return self.sizes[0]

    @property
    def out_dim(self) -> int:
        return self.sizes[-1]

    @property
    def params(self) -> list[np.ndarray]:
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def param_names(self) -> list[str]:
        names = []
        for i in range(len(self.weights)):
            names += [f"layer{i}.weight", f"layer{i}.bias"]
        return names

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params])

    def set_flat(self, flat: np.ndarray) -> None:
        i = 0
        for p in self.params:
            p[...] = flat[i:i + p.size].reshape(p.shape)
            i += p.size

    def copy(self) -> "Mlp":
        other = Mlp.__new__(Mlp)
        other.sizes = self.sizes
        other.weights = [W.copy() for W in self.weights]
        other.biases = [b.copy() for b in self.biases]
        return other

    def forward(self, x: np.ndarray) -> np.ndarray:
        h = np.asarray(x, dtype=float)
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ W + b
            if i < last:
                h = np.maximum(h, 0.0)
        return h

    def forward_cache(self, x: np.ndarray):
        """Forward pass that also returns the per-layer inputs and pre-activations."""
        h = np.atleast_2d(np.asarray(x, dtype=float))
        if h.shape[1] != self.in_dim:
            raise ValueError(f"input width {h.shape[1]} != network input {self.in_dim}")
        inputs, pre = [], []
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(h)
            z = h @ W + b
            pre.append(z)
            h = np.maximum(z, 0.0) if i < last else z
        return h, (inputs, pre)

    def backward(self, cache, upstream: np.ndarray) -> list[np.ndarray]:
        """Gradients of ``sum(upstream * output)`` w.r.t. every parameter, ordered like ``params``."""
        inputs, pre = cache
        g = np.atleast_2d(np.asarray(upstream, dtype=float))
        if g.shape != pre[-1].shape:
            raise ValueError(f"upstream gradient shape {g.shape} != output shape {pre[-1].shape}")
        grads = [None] * (2 * len(self.weights))
        for i in range(len(self.weights) - 1, -1, -1):
            if i < len(self.weights) - 1:
                g = g * (pre[i] > 0.0)
            grads[2 * i] = inputs[i].T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            if i > 0:
                g = g @ self.weights[i].T
        return grads


class InputNormalizer:
    """Running mean/std input standardization (optional)."""

    def __init__(self, dim: int, clip: float = 10.0, eps: float = 1e-8):
        self.dim = dim
        self.clip = clip
        self.eps = eps
        self.count = 0.0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)

    @property
    def std(self) -> np.ndarray:
        if self.count < 2:
            return np.ones(self.dim)
        return np.sqrt(self.m2 / self.count + self.eps)

    def update(self, x: np.ndarray) -> None:
        x = np.atleast_2d(x)
        n = x.shape[0]
        if n == 0:
            return
        bmean = x.mean(axis=0)
        bm2 = ((x - bmean) ** 2).sum(axis=0)
        tot = self.count + n
        delta = bmean - self.mean
        self.mean = self.mean + delta * (n / tot)
        self.m2 = self.m2 + bm2 + delta ** 2 * (self.count * n / tot)
        self.count = tot

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.clip((x - self.mean) / self.std, -self.clip, self.clip)


class GaussianPolicy:
    """Diagonal Gaussian with a state-dependent mean and fixed standard deviations."""

    def __init__(self, net: Mlp, sigma, normalizer: Optional[InputNormalizer] = None):
        sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (net.out_dim,)).copy()
        if np.any(sigma <= 0.0):
            raise ValueError("sigma must be positive")
        self.net = net
        self.sigma = sigma
        self.normalizer = normalizer

    @property
    def action_dim(self) -> int:
        return self.net.out_dim

    def _inp(self, x):
        x = np.asarray(x, dtype=float)
        return self.normalizer(x) if self.normalizer is not None else x

    def forward_mean(self, features: np.ndarray) -> np.ndarray:
        return self.net.forward(self._inp(features))

    def log_prob_from_mean(self, mu: np.ndarray, action: np.ndarray) -> np.ndarray:
        z = (np.asarray(action) - mu) / self.sigma
        return (-0.5 * np.sum(z * z, axis=-1) - np.sum(np.log(self.sigma))
                - 0.5 * self.action_dim * LOG_2PI)

    def log_prob(self, features: np.ndarray, action: np.ndarray):
        return self.log_prob_from_mean(self.forward_mean(features), action)

    def sample_action(self, features: np.ndarray, rng: np.random.Generator):
        """Returns ``(action, log_prob)`` with ``action = mu + sigma * N(0, I)``."""
        mu = self.forward_mean(features)
        a = mu + self.sigma * rng.standard_normal(mu.shape)
        return a, self.log_prob_from_mean(mu, a)

    def log_prob_grad(self, features: np.ndarray, actions: np.ndarray, coeff: np.ndarray):
        """Gradient of ``sum_i coeff_i log pi(a_i | s_i)`` w.r.t. the mean-network parameters.

        Returns ``(grads, log_probs)``.
        """
        mu, cache = self.net.forward_cache(self._inp(features))
        actions = np.atleast_2d(actions)
        lp = self.log_prob_from_mean(mu, actions)
        dmu = (actions - mu) / (self.sigma ** 2) * np.asarray(coeff, dtype=float)[:, None]
        return self.net.backward(cache, dmu), lp


class ValueNet:
    """Scalar state-value estimate, ``V(s) = output_scale * net(s)``."""

    def __init__(self, net: Mlp, output_scale: float = 1.0, normalizer: Optional[InputNormalizer] = None):
        if net.out_dim != 1:
            raise ValueError("value network must have a single output")
        self.net = net
        self.output_scale = float(output_scale)
        self.normalizer = normalizer

    def _inp(self, x):
        x = np.asarray(x, dtype=float)
        return self.normalizer(x) if self.normalizer is not None else x

    def value(self, features: np.ndarray):
        out = self.net.forward(self._inp(features)) * self.output_scale
        return out[..., 0]

    def value_grad(self, features: np.ndarray, coeff: np.ndarray):
        """Gradient of ``sum_i coeff_i V(s_i)``. Returns ``(grads, values)``."""
        out, cache = self.net.forward_cache(self._inp(features))
        up = np.asarray(coeff, dtype=float)[:, None] * self.output_scale
        return self.net.backward(cache, up), out[:, 0] * self.output_scale


class MomentumSGD:
    """``v <- mu v + g; p <- p + lr v``.

    ``g`` is always an ascent direction; callers minimizing a loss pass the
    negative loss gradient.
    """

    def __init__(self, params: list[np.ndarray], lr: float, momentum: float = 0.9):
        self.lr = float(lr)
        self.momentum = float(momentum)
        self.velocity = [np.zeros_like(p) for p in params]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if len(grads) != len(self.velocity):
            raise ValueError("gradient list does not match optimizer state")
        for p, g, v in zip(params, grads, self.velocity):
            if g.shape != v.shape:
                raise ValueError(f"gradient shape {g.shape} != parameter shape {v.shape}")
            v *= self.momentum
            v += g
            p += self.lr * v


# ---------------------------------------------------------------------------
# checkpoints

CHECKPOINT_MAGIC = b"PMCKPT"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    """Raised for unreadable or incompatible checkpoint files."""


@dataclass
class Checkpoint:
    policy: GaussianPolicy
    value: ValueNet
    policy_opt: Optional[MomentumSGD] = None
    value_opt: Optional[MomentumSGD] = None
    config: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)


def _tensors(ck: Checkpoint):
    out = []
    for role, net in (("policy", ck.policy.net), ("value", ck.value.net)):
        for name, p in zip(net.param_names(), net.params):
            out.append((f"{role}.{name}", role, p))
    for role, opt, net in (("policy_opt", ck.policy_opt, ck.policy.net),
                           ("value_opt", ck.value_opt, ck.value.net)):
        if opt is None:
            continue
        for name, v in zip(net.param_names(), opt.velocity):
            out.append((f"{role}.{name}", role, v))
    out.append(("policy.sigma", "sigma", ck.policy.sigma))
    for role, norm in (("policy_norm", ck.policy.normalizer), ("value_norm", ck.value.normalizer)):
        if norm is not None:
            out.append((f"{role}.mean", role, norm.mean))
            out.append((f"{role}.m2", role, norm.m2))
    return out


def save_checkpoint(ck: Checkpoint, path: Union[str, Path]) -> None:
    """Write a checkpoint. The byte stream depends only on the checkpoint contents."""
    tensors = _tensors(ck)
    entries = []
    offset = 0
    for name, role, arr in tensors:
        entries.append({"name": name, "role": role, "shape": list(arr.shape), "offset": offset})
        offset += arr.size * 8
    header = {
        "tensors": entries,
        "policy_sizes": list(ck.policy.net.sizes),
        "value_sizes": list(ck.value.net.sizes),
        "value_output_scale": ck.value.output_scale,
        "policy_opt": None if ck.policy_opt is None else {"lr": ck.policy_opt.lr, "momentum": ck.policy_opt.momentum},
        "value_opt": None if ck.value_opt is None else {"lr": ck.value_opt.lr, "momentum": ck.value_opt.momentum},
        "normalizers": {
            role: None if norm is None else {"count": norm.count, "clip": norm.clip, "eps": norm.eps}
            for role, norm in (("policy_norm", ck.policy.normalizer), ("value_norm", ck.value.normalizer))
        },
        "config": ck.config,
        "meta": ck.meta,
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC + b" %d\n" % CHECKPOINT_VERSION)
        f.write(struct.pack("<Q", len(hbytes)))
        f.write(hbytes)
        for _, _, arr in tensors:
            f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    data = Path(path).read_bytes()
    nl = data.find(b"\n")
    first = data[:nl] if nl >= 0 else b""
    parts = first.split(b" ")
    if len(parts) != 2 or parts[0] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    try:
        version = int(parts[1])
    except ValueError:
        raise CheckpointError(f"{path}: unreadable checkpoint version") from None
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    pos = nl + 1
    try:
        (hlen,) = struct.unpack("<Q", data[pos:pos + 8])
        header = json.loads(data[pos + 8:pos + 8 + hlen].decode())
        body = data[pos + 8 + hlen:]
        arrays = {}
        for e in header["tensors"]:
            n = int(np.prod(e["shape"])) if e["shape"] else 1
            if e["offset"] + 8 * n > len(body):
                raise CheckpointError(f"{path}: truncated tensor data for {e['name']}")
            arrays[e["name"]] = np.frombuffer(body, dtype="<f8", count=n,
                                              offset=e["offset"]).reshape(e["shape"]).astype(float)
        pnet = _net_from(header["policy_sizes"], "policy", arrays)
        vnet = _net_from(header["value_sizes"], "value", arrays)
    except CheckpointError:
        raise
    except (struct.error, ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupted checkpoint header ({exc})") from exc
    norms = {}
    for role, info in header["normalizers"].items():
        if info is None:
            norms[role] = None
            continue
        nm = InputNormalizer(arrays[f"{role}.mean"].shape[0], clip=info["clip"], eps=info["eps"])
        nm.count = info["count"]
        nm.mean = arrays[f"{role}.mean"]
        nm.m2 = arrays[f"{role}.m2"]
        norms[role] = nm
    policy = GaussianPolicy(pnet, arrays["policy.sigma"], norms["policy_norm"])
    value = ValueNet(vnet, header["value_output_scale"], norms["value_norm"])
    opts = {}
    for role, net in (("policy_opt", pnet), ("value_opt", vnet)):
        info = header[role]
        if info is None:
            opts[role] = None
            continue
        opt = MomentumSGD(net.params, info["lr"], info["momentum"])
        opt.velocity = [arrays[f"{role}.{n}"] for n in net.param_names()]
        opts[role] = opt
    return Checkpoint(policy, value, opts["policy_opt"], opts["value_opt"], header["config"], header["meta"])


def _net_from(sizes, role, arrays) -> Mlp:
    net = Mlp.__new__(Mlp)
    net.sizes = tuple(sizes)
    net.weights = [arrays[f"{role}.layer{i}.weight"] for i in range(len(sizes) - 1)]
    net.biases = [arrays[f"{role}.layer{i}.bias"] for i in range(len(sizes) - 1)]
    return net
