"""Posterior recursion: variance schedule, martingale mean, equivariance."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from standout.belief import (bayes_weight, diffuse_posterior_mean,
                             initial_state, posterior_variance, predictive,
                             update)
from standout.environment import EnvironmentParams, derive


def make_env(**kw):
    defaults = dict(N=5, sigma_x2=1.0, sigma_e2=1.0, v0=1.5, m0=0.3, x_b=-0.2,
                    c=0.08)
    defaults.update(kw)
    return EnvironmentParams(**defaults)


def test_variance_schedule():
    env = make_env()
    state = initial_state(env)
    for t in range(1, env.N + 1):
        state = update(state, 0.1 * t, env)
        assert state.v == pytest.approx(
            1.0 / (1.0 / env.v0 + t / env.sigma_eta2), rel=1e-14)
    with pytest.raises(ValueError):
        update(state, 0.0, env)


def test_bayes_weight_definition():
    env = make_env()
    for t in range(1, env.N + 1):
        v_prev = posterior_variance(t - 1, env.v0, env.sigma_eta2)
        assert bayes_weight(t, env) == pytest.approx(
            v_prev / (v_prev + env.sigma_eta2), rel=1e-14)
    with pytest.raises(ValueError):
        bayes_weight(0, env)


def test_posterior_mean_is_martingale():
    # updating at the predictive mean leaves the posterior mean unchanged,
    # and simulated one-step means average back to the prior mean
    env = make_env()
    state = initial_state(env)
    mean, var = predictive(state, env)
    assert update(state, mean, env).m == pytest.approx(state.m, abs=1e-14)

    rng = np.random.default_rng(3)
    draws = mean + np.sqrt(var) * rng.standard_normal(400_000)
    ms = np.array([update(state, x, env).m for x in draws[:2000]])
    omega = bayes_weight(1, env)
    # affine in x, so use the closed form on the full sample
    ms_all = state.m + omega * (draws - mean)
    se = ms_all.std() / np.sqrt(len(draws))
    assert abs(ms_all.mean() - state.m) < 4 * se
    assert np.allclose(ms, ms_all[:2000], atol=1e-12)


def test_update_matches_convex_combination():
    env = make_env()
    state = initial_state(env)
    alpha = derive(env).alpha
    x = 0.77
    new = update(state, x, env)
    omega = bayes_weight(1, env)
    assert new.m == pytest.approx(
        (1 - omega) * state.m + omega * (x - alpha[0]), rel=1e-13)
    assert new.M == max(state.M, x)


@given(st.floats(min_value=-5, max_value=5),
       st.lists(st.floats(min_value=-4, max_value=4), min_size=1, max_size=5))
@settings(max_examples=100, deadline=None)
def test_translation_equivariance(delta, xs):
    env = make_env()
    env_shift = make_env(m0=env.m0 + delta, x_b=env.x_b + delta)
    a, b = initial_state(env), initial_state(env_shift)
    for x in xs:
        a = update(a, x, env)
        b = update(b, x + delta, env_shift)
        assert b.m == pytest.approx(a.m + delta, abs=1e-9)
        assert b.M == pytest.approx(a.M + delta, abs=1e-9)
        assert b.v == pytest.approx(a.v, abs=1e-12)


def test_predictive_moments():
    env = make_env()
    state = update(initial_state(env), 0.4, env)
    mean, var = predictive(state, env)
    assert mean == pytest.approx(state.m + derive(env).alpha[1], rel=1e-13)
    assert var == pytest.approx(state.v + env.sigma_eta2, rel=1e-13)


def test_diffuse_limit():
    env_tight = make_env()
    env_diffuse = make_env(v0=1e12)
    xs = [0.3, -0.8, 1.2]
    state = initial_state(env_diffuse)
    for x in xs:
        state = update(state, x, env_diffuse)
    pairs = [(r + 1, x) for r, x in enumerate(xs)]
    assert state.m == pytest.approx(
        diffuse_posterior_mean(pairs, env_tight), abs=1e-8)
    with pytest.raises(ValueError):
        diffuse_posterior_mean([], env_tight)
