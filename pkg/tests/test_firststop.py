"""First-stop regimes, endpoints, and the reliability scan."""

import numpy as np
import pytest

from standout.belief import initial_state, update
from standout.depthlaw import simulate_sessions
from standout.environment import EnvironmentParams, reliability_path_env
from standout.firststop import (classify_first_stop, diffuse_first_stop,
                                first_stop_endpoints, winners_curse_scan)
from standout.gaussmath import std_normal_cdf
from standout.policy import myopic_table, optimal_table


def make_env(**kw):
    defaults = dict(N=2, sigma_x2=1.0, sigma_e2=1.0, v0=1.0, c=0.1, x_b=0.0)
    defaults.update(kw)
    return EnvironmentParams(**defaults)


def test_endpoints_are_indifference_points():
    env = make_env()
    table = optimal_table(env)
    report = classify_first_stop(env, table)
    assert report.regime == "explore"
    state = initial_state(env)
    # at either endpoint the updated lead hits the reservation level
    for endpoint in (report.s1_minus, report.s1_plus):
        after = update(state, endpoint, env)
        assert abs(after.lead - table.reservation[1]) < 1e-9
    assert report.s1_minus < env.x_b < report.s1_plus


def test_probabilities_are_consistent():
    env = make_env(x_b=0.2, c=0.12)
    table = optimal_table(env)
    report = classify_first_stop(env, table)
    assert report.p_tau1 == pytest.approx(
        report.p_cut_losses + report.p_commit, abs=1e-12)
    sd = np.sqrt(env.v0 + env.sigma_eta2)
    from standout.environment import derive
    a1 = derive(env).alpha[0]
    lo = std_normal_cdf((report.s1_minus - env.m0 - a1) / sd)
    hi = std_normal_cdf((env.m0 + a1 - report.s1_plus) / sd)
    assert report.p_tau1 == pytest.approx(lo + hi, abs=1e-12)


def test_p_tau1_against_simulation():
    env = make_env(x_b=-0.3, c=0.08)
    table = optimal_table(env)
    report = classify_first_stop(env, table)
    batch = simulate_sessions(env, table, n=400_000, seed=5)
    emp = np.mean(batch.depth == 1)
    se = np.sqrt(emp * (1 - emp) / len(batch))
    assert abs(emp - report.p_tau1) < 4 * se


def test_single_item_list_always_trusts():
    env = make_env(N=1)
    report = classify_first_stop(env, myopic_table(env))
    assert report.regime == "trust"
    assert report.p_tau1 == 1.0


def test_trust_regime_under_near_perfect_ranking():
    base = make_env(N=5, c=0.05, x_b=-1.0)
    env = reliability_path_env(base, 0.999)
    table = optimal_table(env)
    report = classify_first_stop(env, table)
    assert report.regime == "trust"
    assert report.p_tau1 == 1.0


def test_endpoints_move_out_with_smaller_cost():
    env_hi = make_env(c=0.15)
    env_lo = make_env(c=0.05)
    r_hi = classify_first_stop(env_hi, optimal_table(env_hi))
    r_lo = classify_first_stop(env_lo, optimal_table(env_lo))
    # cheaper inspection widens the continuation interval
    assert r_lo.s1_minus < r_hi.s1_minus
    assert r_lo.s1_plus > r_hi.s1_plus
    assert r_lo.p_tau1 < r_hi.p_tau1


def test_diffuse_first_stop_decreasing_in_mu():
    env = make_env(N=5, v0=1.0, c=0.07, x_b=-0.4)
    table = optimal_table(env)
    vals = [diffuse_first_stop(env, table, mu) for mu in (-2.0, -0.5, 1.0)]
    assert vals[0] >= vals[1] >= vals[2]


def test_winners_curse_scan_shape():
    base = make_env(N=5, c=0.05, x_b=-1.0)
    grid = np.linspace(0.1, 0.999, 12)
    results, first_trust = winners_curse_scan(base, grid)
    assert len(results) == len(grid)
    assert first_trust is not None and first_trust < 1.0
    trusts = [r["trust_holds"] for r in results if r["interior"]]
    # once trust holds along the path it keeps holding
    seen = False
    for flag in trusts:
        if seen:
            assert flag
        seen = seen or flag


def test_first_stop_endpoints_ordering():
    env = make_env()
    kappa1 = optimal_table(env).kappa[1]
    lo, hi = first_stop_endpoints(env, kappa1)
    assert lo < hi
