"""Acceptance checks. Each test records one PASS/FAIL line, printed in the terminal summary.

The learning checks train real policies from the bundled configs and take
tens of minutes in total on one CPU core.
"""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from planarmimic import cli
from planarmimic import rewards as R
from planarmimic.charmodel import build_chain, build_pendulum
from planarmimic.cli import build_env, load_run_config, main, push_trial
from planarmimic.multiskill import CompositeConfig, boltzmann_weights, composite_probabilities, selector_reward
from planarmimic.nets import load_checkpoint
from planarmimic.physics import SimConfig, center_of_mass, control_step, energy, make_state, step
from planarmimic.rl import compute_gae, lambda_return, lambda_returns, train
from planarmimic.rl.rollout import Episode, RolloutBatch
from planarmimic.rl.train import evaluate

from conftest import record
from frozen import BOLTZMANN_1_0, BOLTZMANN_DOMINANT
from gradcheck import policy_logprob_instance, surrogate_instance, value_instance
from return_oracle import enum_lambda_return, random_episode
from reward_cases import run_cases

CONFIGS = Path(cli.__file__).parent / "data" / "configs"


def final_curve_nr(curve):
    return [r["mean_NR"] for r in curve if r.get("mean_NR") is not None]


def test_c1_returns_match_enumeration():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        r, v, term, gamma, lam = random_episode(rng, max_len=12)
        T = len(r)
        obs = v[:T, None]
        final = np.array([v[T]])
        batch = RolloutBatch([Episode(obs, np.zeros((T, 1)), np.zeros(T), r, final, term)])

        class Table:
            def value(self, x):
                return np.asarray(x)[:, 0]

        adv = compute_gae(batch, Table(), gamma, lam)
        rec = lambda_returns(r, v, gamma, lam)
        for t in range(T):
            oracle = enum_lambda_return(r, v, gamma, lam, t)
            worst = max(worst, abs(lambda_return(r, v, gamma, lam, t) - oracle), abs(rec[t] - oracle),
                        abs(adv[t] - (oracle - v[t])))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-10 and elapsed < 1.0
    record(1, ok, f"max |error| {worst:.2e} over 200 episodes in {elapsed:.2f} s (need < 1e-10, < 1 s)")
    assert ok


def test_c2_gradient_checks():
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    errs = {"log-prob": [], "value": [], "surrogate": []}
    clipped = 0
    for _ in range(50):
        errs["log-prob"].append(policy_logprob_instance(rng))
        errs["value"].append(value_instance(rng))
        e, c = surrogate_instance(rng)
        errs["surrogate"].append(e)
        clipped += c
    elapsed = time.perf_counter() - t0
    worst = {k: max(v) for k, v in errs.items()}
    ok = all(w < 1e-5 for w in worst.values()) and clipped > 0 and elapsed < 30.0
    detail = ", ".join(f"{k} {w:.1e}" for k, w in worst.items())
    record(2, ok, f"max rel. error {detail}; {clipped} clipped samples; 3x50 instances in {elapsed:.1f} s")
    assert ok


def test_c3_reward_formulas():
    worst, _ = run_cases()
    w = R.RewardWeights()
    weights_ok = ((w.pose_weight, w.velocity_weight, w.end_effector_weight, w.com_weight) == (0.65, 0.1, 0.15, 0.1)
                  and (w.pose_scale, w.velocity_scale, w.end_effector_scale, w.com_scale) == (2.0, 0.1, 40.0, 10.0)
                  and (w.imitation_weight, w.task_weight) == (0.7, 0.3))
    ok = worst <= 1e-12 and weights_ok
    record(3, ok, f"max |error| {worst:.1e} over the worked examples; default weights {'match' if weights_ok else 'DIFFER'}")
    assert ok


def test_c4_physics_oracles():
    t0 = time.perf_counter()
    cfg = SimConfig()
    # ballistic free fall of a single body for 0.5 s
    model = build_chain(1)
    s = make_state(model, (0.0, 100.0), 0.3)
    y0 = center_of_mass(model, s)[0][1]
    for _ in range(600):
        s = step(model, s, np.zeros(0), cfg)
    fall_err = abs(center_of_mass(model, s)[0][1] - (y0 - 0.5 * 9.81 * 0.25))
    # frictionless pendulum for 10 s at 1200 Hz
    pend = build_pendulum()
    s = make_state(pend, (0.0, 0.0), 0.0, np.array([2.0]))
    e0 = sum(energy(pend, s, cfg))
    drift = 0.0
    for k in range(12000):
        s = step(pend, s, np.zeros(1), cfg)
        if k % 50 == 49:
            drift = max(drift, abs(sum(energy(pend, s, cfg)) - e0) / abs(e0))
    # stable PD on one joint at increasing stiffness
    spd_ok = True
    inertia = pend.links[1].inertia + pend.links[1].mass * 0.25
    for kp in (10.0, 1e2, 1e3, 1e4):
        m = build_pendulum(torque_limit=1e9, kp=kp, kd=2.0 * math.sqrt(kp * inertia))
        s = make_state(m, (0.0, 0.0), 0.0, np.array([0.0]))
        for _ in range(int((10.0 * math.sqrt(inertia / kp) + 1.0) * 30)):
            s = control_step(m, s, np.array([0.5]), SimConfig(gravity=0.0))
            spd_ok &= bool(np.isfinite(s.q[3]) and s.q[3] <= 0.5 + 1e-9)
        spd_ok &= abs(s.q[3] - 0.5) < 1e-3
    elapsed = time.perf_counter() - t0
    ok = fall_err < 1e-3 and drift < 0.005 and spd_ok and elapsed < 10.0
    record(4, ok, f"free fall error {fall_err:.1e} m, energy drift {100 * drift:.3f}%, "
                  f"stable PD {'converged' if spd_ok else 'FAILED'} up to kp 1e4; {elapsed:.1f} s")
    assert ok


def smoothed(values, window=5):
    v = np.asarray(values, dtype=float)
    return np.convolve(v, np.ones(window) / window, mode="valid")


def test_c5_learning_sanity():
    t0 = time.perf_counter()
    results = {}
    for name in ("point_mass", "pendulum"):
        cfg = load_run_config(CONFIGS / f"{name}.json")
        tc = cfg.train
        assert (tc.gamma, tc.lam, tc.clip_eps, tc.batch_size, tc.minibatch_size) == (0.95, 0.95, 0.2, 4096, 256)
        assert tc.sample_budget <= 2_000_000
        res = train(build_env(cfg), tc)
        results[name] = final_curve_nr(res.curve)
    pm_final = results["point_mass"][-1]
    curve = smoothed(results["pendulum"])
    gain = curve[-1] - curve[0]
    # "monotone trend": the smoothed curve never falls far below its running best
    sag = float(np.max(np.maximum.accumulate(curve) - curve))
    elapsed = time.perf_counter() - t0
    ok = pm_final > 0.9 and gain > 0.1 and sag < 0.02 and elapsed < 1800
    record(5, ok, f"point-mass NR {pm_final:.3f} (need > 0.9); pendulum smoothed NR {curve[0]:.3f} -> "
                  f"{curve[-1]:.3f}, largest sag {sag:.3f}; {elapsed / 60:.1f} min")
    assert ok


@pytest.fixture(scope="session")
def hop_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("hop")
    t0 = time.perf_counter()
    assert main(["train", "--config", str(CONFIGS / "hop.json"), "--out", str(out)]) == 0
    return out, time.perf_counter() - t0


def test_c6_planar_imitation(hop_run):
    out, elapsed = hop_run
    cfg = load_run_config(out / "config.json")
    ck = load_checkpoint(out / "checkpoint.pmck")
    env = build_env(cfg)
    assert 3 <= env.model.n_links <= 5 and env.clip.loop and cfg.train.rsi and cfg.train.early_termination
    nr = evaluate(env, ck.policy, 32, "paper-eval", np.random.default_rng(12345))
    samples = ck.meta["samples"]
    ok = nr.mean() >= 0.6 and samples <= 10_000_000 and elapsed < 4 * 3600
    record(6, ok, f"hop NR {nr.mean():.3f} +- {nr.std():.3f} over 32 RSI+ET episodes (need >= 0.6); "
                  f"{samples} samples, {elapsed / 60:.1f} min")
    assert ok


def test_c7_ablation_ordering(tmp_path):
    out = tmp_path / "ablation"
    cfg_path = CONFIGS / "hop_ablation.json"
    clip = build_env(load_run_config(cfg_path)).clip
    assert main(["ablate", "--config", str(cfg_path), "--out", str(out), "--seeds", "3",
                 "--modes", "RSI+ET,ET,RSI"]) == 0
    means = {}
    for line in (out / "ablation.csv").read_text().splitlines()[1:]:
        mode, seed, nr = line.split(",")
        if seed == "mean":
            means[mode] = float(nr)
    margin = means["RSI+ET"] - max(means["ET"], means["RSI"])
    ok = margin >= -0.05
    record(7, ok, "mean final NR over 3 seeds (fixed start, no ET): " +
           ", ".join(f"{m} {v:.3f}" for m, v in means.items()) +
           f"; RSI+ET minus best other {margin:+.3f} (need >= -0.05); clip {clip.name}")
    assert ok


def test_c8_multiskill():
    p = boltzmann_weights([1.0, 0.0], 0.3)
    dom = boltzmann_weights([1.0, -1.0], 0.3)[0]
    ex_err = max(abs(p[0] - BOLTZMANN_1_0[0]), abs(p[1] - BOLTZMANN_1_0[1]), abs(dom - BOLTZMANN_DOMINANT))
    rng = np.random.default_rng(99)
    cfg = CompositeConfig(temperature=1e-6, no_repeat=False)
    argmax_hits = 0
    for _ in range(1000):
        v = rng.normal(size=int(rng.integers(2, 8)))
        p = composite_probabilities(v, cfg)
        argmax_hits += int(rng.choice(len(p), p=p)) == int(np.argmax(v))
    projection_ok = True
    for _ in range(200):
        k = int(rng.integers(2, 6))
        rs = rng.uniform(size=k)
        i = int(rng.integers(k))
        mutated = rng.uniform(size=k)
        mutated[i] = rs[i]
        projection_ok &= selector_reward(i, rs) == selector_reward(i, mutated) == rs[i]
    ok = ex_err <= 1e-12 and argmax_hits == 1000 and projection_ok
    record(8, ok, f"Boltzmann example error {ex_err:.1e}; argmax agreement {argmax_hits}/1000; "
                  f"projection under mutation {'holds' if projection_ok else 'BROKEN'}")
    assert ok


def test_c9_determinism(tmp_path):
    cfg = tmp_path / "cfg.json"
    doc = json.loads((CONFIGS / "smoke.json").read_text())
    doc["out"] = str(tmp_path / "run")
    cfg.write_text(json.dumps(doc))
    files = {}
    for k in range(2):
        d = tmp_path / f"rep{k}"
        run = d / "train"
        assert main(["train", "--config", str(cfg), "--out", str(run)]) == 0
        ck = str(tmp_path / "rep0" / "train" / "checkpoint.pmck")
        assert main(["eval", "--checkpoint", ck, "--episodes", "4", "--out", str(d / "eval.csv")]) == 0
        assert main(["perturb", "--checkpoint", ck, "--out", str(d / "perturb"), "--max-force", "60"]) == 0
        assert main(["rollout", "--checkpoint", ck, "--out", str(d / "trace.csv")]) == 0
        files[k] = {p.relative_to(d): p.read_bytes() for p in sorted(d.rglob("*.csv"))}
    same = files[0] == files[1] and len(files[0]) == 5
    record(9, same, f"{len(files[0])} CSV outputs of train/eval/perturb/rollout "
                    f"{'byte-identical' if same else 'DIFFER'} across reruns")
    assert same


def test_c10_perturbation_boundary(hop_run, tmp_path):
    out, _ = hop_run
    assert main(["perturb", "--checkpoint", str(out / "checkpoint.pmck"), "--out", str(tmp_path)]) == 0
    summary = (tmp_path / "perturb.csv").read_text().splitlines()[1:]
    trials = [line.split(",") for line in (tmp_path / "perturb_trials.csv").read_text().splitlines()[1:]]
    cfg = load_run_config(out / "config.json")
    policy = load_checkpoint(out / "checkpoint.pmck").policy
    ok = True
    report = []
    for row in summary:
        skill, direction, best = row.split(",")
        sign = cli.PUSH_DIRECTIONS[direction]
        mags = [float(t[1]) for t in trials if t[0] == direction]
        ok &= mags == [10.0 * k for k in range(len(mags))]
        best = None if best == "" else float(best)
        if best is None:
            ok = False
            continue
        # independent replay in a fresh environment: every magnitude up to the maximum survives
        env = build_env(cfg)
        below = all(push_trial(env, policy, 10.0 * k, sign, 0.2) for k in range(int(round(best / 10.0)) + 1))
        beyond = not push_trial(env, policy, best + 10.0, sign, 0.2)
        ok &= below and beyond
        report.append(f"{direction} {best:.0f} N")
    record(10, ok, f"{cfg.clips[0]}: " + ", ".join(report) + " with 10 N steps and 0.2 s pushes; "
                   f"all lower magnitudes {'survive' if ok else 'do NOT all survive'}")
    assert ok
