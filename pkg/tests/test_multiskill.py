import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from planarmimic import rewards as R
from planarmimic.authoring import author_hop
from planarmimic.charmodel import build_hopper
from planarmimic.envs import ImitationEnv
from planarmimic.motion import ClipFormatError
from planarmimic.multiskill import (CompositeConfig, Skill, SkillSet, boltzmann_weights, composite_log_csv,
                                    composite_probabilities, composite_select, normalize_values, run_composite,
                                    selector_goal, selector_reward)
from planarmimic.physics import SimConfig, make_state

from frozen import BOLTZMANN_1_0, BOLTZMANN_DOMINANT

values_st = st.lists(st.floats(-50, 50), min_size=1, max_size=8)


class ConstValue:
    def __init__(self, v):
        self.v = v

    def value(self, feats):
        return np.full(np.atleast_2d(feats).shape[0], self.v)


class ZeroPolicy:
    def __init__(self, dim):
        self.dim = dim

    def forward_mean(self, obs):
        return np.zeros(self.dim)


def test_selector_goal():
    np.testing.assert_array_equal(selector_goal(0, 4), [1, 0, 0, 0])
    np.testing.assert_array_equal(selector_goal(3, 4), [0, 0, 0, 1])
    with pytest.raises(ValueError):
        selector_goal(4, 4)
    with pytest.raises(ValueError):
        selector_goal(-1, 4)


def test_boltzmann_examples():
    np.testing.assert_allclose(boltzmann_weights([0.3, 0.3, 0.3, 0.3], 0.3), 0.25, atol=1e-15)
    p = boltzmann_weights([1.0, 0.0], 0.3)
    assert abs(p[0] - BOLTZMANN_1_0[0]) <= 1e-12 and abs(p[1] - BOLTZMANN_1_0[1]) <= 1e-12
    assert abs(boltzmann_weights([1.0, -1.0], 0.3)[0] - BOLTZMANN_DOMINANT) <= 1e-12
    with pytest.raises(ValueError):
        boltzmann_weights([1.0], 0.0)
    with pytest.raises(ValueError):
        CompositeConfig(temperature=-1.0)


def test_composite_dominant_skill_probability():
    p = composite_probabilities([5.0, 2.0], CompositeConfig(no_repeat=False))
    assert abs(p[0] - BOLTZMANN_DOMINANT) <= 1e-12


@given(values_st, st.floats(-100, 100), st.floats(0.05, 5.0))
def test_boltzmann_shift_invariance_and_normalization(v, c, T):
    p = boltzmann_weights(v, T)
    assert abs(p.sum() - 1.0) < 1e-12 and np.all(p >= 0.0)
    np.testing.assert_allclose(boltzmann_weights(np.array(v) + c, T), p, atol=1e-9)


@given(values_st, st.randoms(use_true_random=False))
def test_boltzmann_permutation_equivariance(v, rnd):
    perm = list(range(len(v)))
    rnd.shuffle(perm)
    p = boltzmann_weights(v, 0.3)
    np.testing.assert_allclose(boltzmann_weights(np.array(v)[perm], 0.3), p[perm], atol=1e-15)


def test_normalize_values():
    np.testing.assert_allclose(normalize_values([2.0, 4.0, 3.0]), [-1.0, 1.0, 0.0])
    np.testing.assert_array_equal(normalize_values([7.0, 7.0]), [0.0, 0.0])


def test_low_temperature_selects_argmax():
    rng = np.random.default_rng(0)
    cfg = CompositeConfig(temperature=1e-6, no_repeat=False)
    for _ in range(1000):
        v = rng.normal(size=int(rng.integers(2, 7)))
        p = composite_probabilities(v, cfg)
        assert int(rng.choice(len(p), p=p)) == int(np.argmax(v))


def hopper_skills(values, model):
    clip = author_hop(model)
    return SkillSet([Skill(clip, ZeroPolicy(model.action_dim), ConstValue(v), "offset") for v in values])


def test_composite_select_uses_value_nets_and_low_temperature_argmax():
    model = build_hopper()
    skills = hopper_skills([0.1, 0.9, -0.3], model)
    state = make_state(model, (0.0, 0.9), 0.0, np.zeros(3))
    rng = np.random.default_rng(1)
    idx, values, norm, p = composite_select(skills, model, state, CompositeConfig(temperature=1e-6,
                                                                                   no_repeat=False), rng)
    assert idx == 1
    np.testing.assert_allclose(values, [0.1, 0.9, -0.3])
    assert norm.min() == -1.0 and norm.max() == 1.0


def test_two_skills_no_repeat_alternate():
    model = build_hopper()
    skills = hopper_skills([1.0, 0.0], model)
    state = make_state(model, (0.0, 0.9), 0.0, np.zeros(3))
    rng = np.random.default_rng(2)
    prev = None
    seq = []
    for _ in range(6):
        prev = composite_select(skills, model, state, CompositeConfig(), rng, prev)[0]
        seq.append(prev)
    assert all(a != b for a, b in zip(seq, seq[1:]))


def test_composite_errors():
    model = build_hopper()
    state = make_state(model, (0.0, 0.9), 0.0, np.zeros(3))
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError, match="empty"):
        composite_select(SkillSet([]), model, state, CompositeConfig(), rng)
    with pytest.raises(ValueError, match="two skills"):
        composite_select(hopper_skills([0.0], model), model, state, CompositeConfig(), rng, previous=0)


def test_equal_cycle_requirement():
    model = build_hopper()
    a = author_hop(model)
    b = author_hop(model, name="long", stance_time=0.5)
    SkillSet([Skill(a), Skill(b)])
    with pytest.raises(ClipFormatError):
        SkillSet([Skill(a), Skill(b)], require_equal_cycles=True)


def test_run_composite_log():
    model = build_hopper()
    skills = hopper_skills([0.5, 0.2], model)
    clip = skills[0].clip
    state = make_state(model, clip.frames[0, :2], clip.frames[0, 2], clip.frames[0, 3:])
    rows = run_composite(skills, model, state, SimConfig(), CompositeConfig(), np.random.default_rng(0), 3)
    assert [r["skill"] for r in rows] in ([0, 1, 0], [1, 0, 1])
    text = composite_log_csv(rows)
    lines = text.splitlines()
    assert lines[0] == "cycle,skill,normalized_values,probabilities" and len(lines) == 4


@settings(max_examples=100)
@given(st.lists(st.floats(0, 1), min_size=2, max_size=6), st.data())
def test_selector_reward_is_a_projection(rs, data):
    i = data.draw(st.integers(0, len(rs) - 1))
    mutated = [r if j == i else data.draw(st.floats(0, 1)) for j, r in enumerate(rs)]
    assert selector_reward(i, rs) == rs[i] == selector_reward(i, mutated)


def test_selector_reward_bounds():
    with pytest.raises(ValueError):
        selector_reward(2, [0.1, 0.2])


def test_goal_switch_changes_compared_clip_from_next_step():
    model = build_hopper()
    clips = [author_hop(model), author_hop(model, name="hop_forward", forward_speed=0.4)]
    env = ImitationEnv(model, clips, action_mode="offset", skill_selector=True)
    obs = env.reset(np.random.default_rng(5), "fixed")
    switches = 0
    for _ in range(5 * 18):
        goal_before = obs[-2:]
        obs, r, _, _, info = env.step(np.zeros(model.action_dim))
        # step-through oracle: recompute every clip's imitation reward at the new state
        per_clip = [R.imitation_reward(env.imitation_terms(c, env.phase)) for c in clips]
        selected = int(np.argmax(goal_before))
        assert r == pytest.approx(selector_reward(selected, per_clip), abs=1e-12)
        switches += int(np.argmax(obs[-2:]) != selected)
    assert switches >= 1
