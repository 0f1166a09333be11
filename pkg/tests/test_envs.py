import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from acbandit.envs import (EnvSpec, EnvState, advance, burden_chain, context_from_noise,
                           env_next_context, env_outcome, env_true_mean, mean_outcomes,
                           sample_contexts, true_effects)
from acbandit.errors import ConfigError, EnvError

ctx = st.lists(st.floats(-4, 4), min_size=3, max_size=3)


def _linear_cost(s, a, c3=0.4):
    return 10 - 0.4 * s[0] - 0.4 * s[1] + c3 * s[2] - a * (0.2 + 0.2 * s[0] + 0.2 * s[1])


def test_dimensions():
    assert (EnvSpec("iid").d, EnvSpec("iid").p, EnvSpec("iid").k) == (3, 4, 8)
    assert (EnvSpec("toy_binary").d, EnvSpec("toy_binary").k) == (1, 4)


def test_sign_and_noise_defaults():
    assert EnvSpec("iid").outcome_sign == -1.0 and EnvSpec("iid").noise_sd == 1.0
    toy = EnvSpec("toy_binary")
    assert toy.outcome_sign == 1.0 and toy.noise_sd == 9.0


def test_invalid_specs():
    with pytest.raises(ConfigError):
        EnvSpec("lunar")
    with pytest.raises(ConfigError):
        EnvSpec("iid", tau=0.4)
    with pytest.raises(ConfigError):
        EnvSpec("nonlinear", alpha_nl=1.5)


@given(ctx, st.integers(0, 1))
def test_iid_mean_formula(s, a):
    assert env_true_mean(EnvSpec("iid"), s, a) == pytest.approx(_linear_cost(s, a))


@given(ctx, st.integers(0, 1))
def test_burden_at_default_weight_matches_iid_and_zero_drops_s3(s, a):
    assert env_true_mean(EnvSpec("burden", tau=0.4), s, a) == pytest.approx(env_true_mean(EnvSpec("iid"), s, a))
    s2 = list(s)
    s2[2] += 1.7
    b0 = EnvSpec("burden", tau=0.0)
    assert env_true_mean(b0, s, a) == pytest.approx(env_true_mean(b0, s2, a))


@given(ctx, st.integers(0, 1))
def test_nonlinear_alpha_zero_is_linear(s, a):
    assert env_true_mean(EnvSpec("nonlinear", alpha_nl=0.0), s, a) == pytest.approx(_linear_cost(s, a))


def test_nonlinear_transform():
    s = [2.0, 0.0, 0.0]
    x1 = 0.4 * 2.0 + 0.6 * 4.0
    assert env_true_mean(EnvSpec("nonlinear", alpha_nl=0.6), s, 1) == pytest.approx(
        10 - 0.4 * x1 - (0.2 + 0.2 * x1))


def test_toy_means():
    toy = EnvSpec("toy_binary")
    assert [env_true_mean(toy, [s], a) for s in (1, -1) for a in (0, 1)] == [2, 4, 0, 0]
    r0, delta = true_effects(toy, np.array([[1.0], [-1.0]]))
    assert r0.tolist() == [2.0, 0.0] and delta.tolist() == [2.0, 0.0]


@given(st.lists(ctx, min_size=1, max_size=20))
def test_vectorized_means_agree_with_scalar(rows):
    S = np.array(rows)
    for spec in (EnvSpec("iid"), EnvSpec("burden", tau=0.8), EnvSpec("nonlinear", alpha_nl=0.4)):
        m0, m1 = mean_outcomes(spec, S)
        assert np.allclose(m0, [env_true_mean(spec, s, 0) for s in S])
        assert np.allclose(m1, [env_true_mean(spec, s, 1) for s in S])


def test_ar1_recursion_and_stationary_variance():
    spec = EnvSpec("ar1")
    st0 = EnvState()
    s0 = context_from_noise(spec, st0, [1.0, 2.0, 3.0], 0.0)
    assert s0.tolist() == [1.0, 2.0, 3.0]
    s1 = context_from_noise(spec, advance(st0, s0, 1), [0.5, 0.5, 0.5], 0.0)
    sd = np.sqrt(0.84)
    assert np.allclose(s1, [0.4 + sd * 0.5, 0.8 + sd * 0.5, 0.5])
    S = sample_contexts(spec, 200_000, np.random.default_rng(1))
    var = S.var(axis=0)
    assert np.all(np.abs(var - 1.0) < 0.02)
    lag1 = np.corrcoef(S[1:, 0], S[:-1, 0])[0, 1]
    assert lag1 == pytest.approx(0.4, abs=0.01)


def test_burden_dynamics_follow_action():
    spec = EnvSpec("burden", tau=0.4)
    with pytest.raises(EnvError):
        context_from_noise(spec, EnvState(np.zeros(3), None), np.zeros(3), 0.0)
    nxt = context_from_noise(spec, EnvState(np.array([0.0, 0.0, 1.0]), 1), np.zeros(3), 0.0)
    assert nxt[2] == pytest.approx(0.4 + 0.2 + 0.4)
    with pytest.raises(EnvError):
        sample_contexts(spec, 10, np.random.default_rng(0))


def test_burden_chain_stationary_moments():
    spec = EnvSpec("burden", tau=0.4)
    never = burden_chain(spec, [-40.0, 0, 0, 0], 200_000, np.random.default_rng(2), 1000)
    always = burden_chain(spec, [40.0, 0, 0, 0], 200_000, np.random.default_rng(3), 1000)
    assert abs(never[:, 2].mean()) < 0.02
    assert always[:, 2].mean() == pytest.approx(1.0, abs=0.03)
    assert always[:, 2].var() == pytest.approx(1 / (1 - 0.36), rel=0.03)
    assert never[:, 0].var() == pytest.approx(1 / (1 - 0.16), rel=0.03)


def test_toy_contexts_are_fair_signs():
    S = sample_contexts(EnvSpec("toy_binary"), 40_000, np.random.default_rng(4))
    assert set(np.unique(S)) == {-1.0, 1.0}
    assert abs(S.mean()) < 0.02


def test_outcome_noise_scale():
    rng = np.random.default_rng(5)
    spec = EnvSpec("toy_binary")
    ys = np.array([env_outcome(spec, [1.0], 1, rng) for _ in range(20_000)])
    assert ys.mean() == pytest.approx(4.0, abs=0.2)
    assert ys.std() == pytest.approx(9.0, rel=0.03)
    assert env_next_context(spec, EnvState(), rng).shape == (1,)
