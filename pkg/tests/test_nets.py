import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from planarmimic.nets import (Checkpoint, CheckpointError, GaussianPolicy, InputNormalizer, MomentumSGD, Mlp,
                              ValueNet, load_checkpoint, save_checkpoint)

from gradcheck import fd_grads, policy_logprob_instance, rel_error, surrogate_instance, value_instance

LOG_2PI = math.log(2 * math.pi)


def loop_forward(net, x):
    """Plain-Python matrix product, independent of numpy's matmul."""
    h = [list(map(float, row)) for row in np.atleast_2d(x)]
    last = len(net.weights) - 1
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        out = []
        for row in h:
            z = [sum(row[k] * W[k, j] for k in range(W.shape[0])) + b[j] for j in range(W.shape[1])]
            out.append([max(v, 0.0) for v in z] if i < last else z)
        h = out
    return np.array(h)


def test_forward_matches_loop_oracle():
    rng = np.random.default_rng(0)
    net = Mlp(5, (7, 4), 3, rng)
    for b in net.biases:
        b[...] = rng.normal(size=b.shape)
    x = rng.normal(size=(6, 5))
    np.testing.assert_allclose(net.forward(x), loop_forward(net, x), atol=1e-12)


def test_zero_weights_give_zero_output():
    net = Mlp(4, (8,), 2)
    net.set_flat(np.zeros_like(net.get_flat()))
    assert np.all(net.forward(np.ones((3, 4))) == 0.0)


def test_single_layer_identity():
    net = Mlp(3, (), 3)
    net.weights[0][...] = np.eye(3)
    x = np.array([[1.0, -2.0, 3.0]])
    np.testing.assert_array_equal(net.forward(x), x)


def test_bad_widths_and_inputs():
    with pytest.raises(ValueError):
        Mlp(0, (4,), 1)
    with pytest.raises(ValueError):
        Mlp(3, (0,), 1)
    with pytest.raises(ValueError, match="input width"):
        Mlp(3, (4,), 1).forward_cache(np.zeros((2, 5)))


def test_flat_round_trip_and_copy_independence():
    net = Mlp(3, (5,), 2, np.random.default_rng(1))
    flat = net.get_flat()
    other = net.copy()
    other.set_flat(flat + 1.0)
    np.testing.assert_array_equal(net.get_flat(), flat)
    np.testing.assert_array_equal(other.get_flat(), flat + 1.0)
    assert net.param_names() == ["layer0.weight", "layer0.bias", "layer1.weight", "layer1.bias"]


def test_zero_upstream_gives_zero_gradients():
    net = Mlp(3, (6,), 2, np.random.default_rng(2))
    x = np.random.default_rng(3).normal(size=(4, 3))
    out, cache = net.forward_cache(x)
    assert all(np.all(g == 0.0) for g in net.backward(cache, np.zeros_like(out)))


def test_relu_derivative_at_zero_is_zero():
    net = Mlp(1, (1,), 1)
    net.weights[0][...] = 1.0
    net.weights[1][...] = 1.0
    _, cache = net.forward_cache(np.zeros((1, 1)))
    gW0, gb0, gW1, gb1 = net.backward(cache, np.ones((1, 1)))
    assert gb0[0] == 0.0 and gW0[0, 0] == 0.0
    assert gb1[0] == 1.0


def test_backward_matches_finite_differences():
    rng = np.random.default_rng(4)
    net = Mlp(4, (9, 7), 3, rng)
    x = rng.normal(size=(5, 4))
    up = rng.normal(size=(5, 3))
    _, cache = net.forward_cache(x)
    grads = net.backward(cache, up)
    numeric = fd_grads(net.params, lambda: float(np.sum(up * net.forward(x))))
    assert rel_error(grads, numeric) < 1e-5


@pytest.mark.parametrize("seed", range(5))
def test_policy_value_and_surrogate_gradients(seed):
    rng = np.random.default_rng(1000 + seed)
    assert policy_logprob_instance(rng) < 1e-5
    assert value_instance(rng) < 1e-5
    assert surrogate_instance(rng)[0] < 1e-5


def unit_policy(dim=1, sigma=1.0):
    net = Mlp(2, (), dim)
    net.set_flat(np.zeros_like(net.get_flat()))
    return GaussianPolicy(net, np.full(dim, sigma))


def test_log_prob_closed_forms():
    pol = unit_policy()
    x = np.zeros((1, 2))
    assert pol.log_prob(x, np.array([[1.0]]))[0] == pytest.approx(-0.5 - 0.5 * LOG_2PI, abs=1e-14)
    assert pol.log_prob(x, np.array([[1.0]]))[0] == pytest.approx(-1.4189385332046727, abs=1e-12)
    sig = np.array([0.5, 2.0, 0.1])
    pol3 = GaussianPolicy(unit_policy(3).net, sig)
    expected = -np.sum(np.log(sig)) - 1.5 * LOG_2PI
    assert pol3.log_prob(x, np.zeros((1, 3)))[0] == pytest.approx(expected, abs=1e-12)


def test_density_integrates_to_one():
    pol = GaussianPolicy(unit_policy().net, np.array([0.3]))
    grid = np.linspace(-4.0, 4.0, 40001)
    dens = np.exp(pol.log_prob(np.zeros((grid.size, 2)), grid[:, None]))
    total = np.sum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))
    assert abs(total - 1.0) < 1e-3


def test_sigma_must_be_positive():
    with pytest.raises(ValueError):
        GaussianPolicy(Mlp(2, (), 2), np.array([0.1, 0.0]))


def test_sampled_actions_have_requested_spread():
    pol = GaussianPolicy(unit_policy(2).net, np.array([0.2, 0.7]))
    rng = np.random.default_rng(5)
    a, lp = pol.sample_action(np.zeros((20000, 2)), rng)
    np.testing.assert_allclose(a.std(axis=0), [0.2, 0.7], rtol=0.03)
    np.testing.assert_allclose(lp, pol.log_prob(np.zeros((20000, 2)), a), atol=1e-12)


def test_value_net_single_output_only():
    with pytest.raises(ValueError):
        ValueNet(Mlp(3, (4,), 2))


def test_momentum_recurrence():
    p = [np.zeros(3)]
    g = np.array([1.0, -2.0, 0.5])
    opt = MomentumSGD(p, lr=0.1, momentum=0.9)
    opt.step(p, [g])
    opt.step(p, [g])
    np.testing.assert_allclose(p[0], 0.1 * (g + 1.9 * g), atol=1e-15)


def test_zero_momentum_is_plain_ascent():
    p = [np.ones(2)]
    opt = MomentumSGD(p, lr=0.5, momentum=0.0)
    for _ in range(3):
        opt.step(p, [np.array([1.0, -1.0])])
    np.testing.assert_allclose(p[0], [2.5, -0.5])
    with pytest.raises(ValueError):
        opt.step(p, [np.zeros(3)])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=40))
def test_normalizer_matches_batch_statistics(values):
    x = np.array(values)[:, None]
    norm = InputNormalizer(1)
    half = len(values) // 2
    norm.update(x[:half])
    norm.update(x[half:])
    assert norm.mean[0] == pytest.approx(x.mean(), abs=1e-6 * (1 + np.abs(x).max()))
    assert np.all(np.abs(norm(x)) <= norm.clip)


def make_checkpoint(seed=0, with_norm=True):
    rng = np.random.default_rng(seed)
    norm_p = InputNormalizer(4) if with_norm else None
    if norm_p is not None:
        norm_p.update(rng.normal(size=(10, 4)))
    pol = GaussianPolicy(Mlp(4, (8,), 2, rng), np.array([0.1, 0.2]), norm_p)
    val = ValueNet(Mlp(4, (8,), 1, rng), 2.0)
    popt = MomentumSGD(pol.net.params, 1e-3)
    popt.step(pol.net.params, [rng.normal(size=p.shape) for p in pol.net.params])
    return Checkpoint(pol, val, popt, MomentumSGD(val.net.params, 1e-2), {"seed": seed}, {"iteration": 3})


def test_checkpoint_bytes_round_trip(tmp_path):
    a, b = tmp_path / "a.pmck", tmp_path / "b.pmck"
    save_checkpoint(make_checkpoint(), a)
    save_checkpoint(load_checkpoint(a), b)
    assert a.read_bytes() == b.read_bytes()


def test_reloaded_policy_evaluates_identically(tmp_path):
    ck = make_checkpoint(1)
    p = tmp_path / "c.pmck"
    save_checkpoint(ck, p)
    back = load_checkpoint(p)
    x = np.random.default_rng(2).normal(size=(7, 4))
    np.testing.assert_array_equal(back.policy.forward_mean(x), ck.policy.forward_mean(x))
    np.testing.assert_array_equal(back.value.value(x), ck.value.value(x))
    for u, v in zip(back.policy_opt.velocity, ck.policy_opt.velocity):
        np.testing.assert_array_equal(u, v)
    assert back.config == {"seed": 1} and back.meta == {"iteration": 3}


def test_checkpoint_without_optional_parts(tmp_path):
    ck = make_checkpoint(with_norm=False)
    ck.policy_opt = ck.value_opt = None
    p = tmp_path / "d.pmck"
    save_checkpoint(ck, p)
    back = load_checkpoint(p)
    assert back.policy_opt is None and back.policy.normalizer is None


@pytest.mark.parametrize("mutate, match", [
    (lambda d: b"NOTCKP 1\n" + d.split(b"\n", 1)[1], "not a checkpoint"),
    (lambda d: d.replace(b"PMCKPT 1", b"PMCKPT 9", 1), "unsupported"),
    (lambda d: d[:30] + b"}}}{{" + d[35:], "corrupted"),
    (lambda d: d[:-16], "truncated"),
])
def test_corrupted_checkpoints_raise(tmp_path, mutate, match):
    p = tmp_path / "e.pmck"
    save_checkpoint(make_checkpoint(), p)
    p.write_bytes(mutate(p.read_bytes()))
    with pytest.raises(CheckpointError, match=match):
        load_checkpoint(p)
