"""Environment construction, rank shifts, and the interior condition."""

import json

import mpmath as mp
import numpy as np
import pytest

from standout.environment import (EnvironmentParams, derive,
                                  env_from_shift_scale,
                                  interior_condition_slack, rank_quantiles,
                                  reliability_path_env, require_interior)

mp.mp.dps = 30


def base_env(**kw):
    defaults = dict(N=4, sigma_x2=1.0, sigma_e2=1.0, v0=1.0, c=0.1)
    defaults.update(kw)
    return EnvironmentParams(**defaults)


def test_validation():
    with pytest.raises(ValueError):
        base_env(N=0)
    with pytest.raises(ValueError):
        base_env(sigma_x2=-1.0)
    with pytest.raises(ValueError):
        base_env(c=0.0)
    with pytest.raises(ValueError):
        base_env(quantile_rule="jitter")
    with pytest.raises(ValueError):
        base_env(alpha_override=(0.1, 0.2))


def test_derived_identities():
    env = base_env(sigma_x2=0.8, sigma_e2=1.2)
    d = derive(env)
    assert d.rho == pytest.approx(0.8 / 2.0)
    assert d.sigma_z == pytest.approx(np.sqrt(2.0))
    assert d.sigma_eta2 == pytest.approx(0.8 * (1 - 0.4))
    assert np.allclose(d.alpha, (0.8 / np.sqrt(2.0)) * d.q)


def test_midpoint_quantiles_against_mpmath():
    q = rank_quantiles(4, "midpoint")
    ref = [float(mp.sqrt(2) * mp.erfinv(2 * (1 - i / 5.0) - 1))
           for i in (1, 2, 3, 4)]
    assert np.allclose(q, ref, atol=1e-12)
    # symmetric for the midpoint rule
    assert np.allclose(q, -q[::-1], atol=1e-12)


def test_blom_quantiles():
    q = rank_quantiles(3, "blom")
    ref = [float(mp.sqrt(2) * mp.erfinv(2 * (1 - (i - 0.375) / 3.25) - 1))
           for i in (1, 2, 3)]
    assert np.allclose(q, ref, atol=1e-12)
    assert np.all(np.diff(q) < 0)


def test_alpha_override():
    env = base_env(N=3, sigma_x2=2.0, sigma_e2=2.0,
                   alpha_override=(0.3, 0.1, 0.0))
    assert np.allclose(derive(env).alpha, [0.3, 0.1, 0.0])
    assert env.sigma_eta2 == pytest.approx(1.0)


def test_interior_slack_matches_direct_integral():
    env = base_env(x_b=0.4, c=0.12)
    d = derive(env)
    sd = mp.sqrt(env.v0 + d.sigma_eta2)
    mean = mp.mpf(env.m0) + d.alpha[0]
    upside = mp.quad(lambda x: (x - env.x_b) * mp.npdf((x - mean) / sd) / sd,
                     [env.x_b, mp.inf])
    assert interior_condition_slack(env) == pytest.approx(
        float(upside - env.c), abs=1e-12)


def test_require_interior():
    require_interior(base_env())
    with pytest.raises(ValueError):
        require_interior(base_env(c=50.0))


def test_json_roundtrip(tmp_path):
    env = base_env(m0=-0.2, x_b=0.3, quantile_rule="blom")
    path = tmp_path / "env.json"
    path.write_text(json.dumps(env.to_dict()))
    assert EnvironmentParams.from_json(str(path)) == env


def test_env_from_shift_scale_roundtrip():
    env = base_env(sigma_x2=1.3, sigma_e2=0.9, m0=0.2, x_b=-0.1, c=0.07)
    d = derive(env)
    rebuilt = env_from_shift_scale(N=env.N, sigma_eta2=env.sigma_eta2,
                                   alpha_scale=env.sigma_x2 / env.sigma_z,
                                   v0=env.v0, m0=env.m0, x_b=env.x_b, c=env.c)
    assert rebuilt.sigma_eta2 == pytest.approx(env.sigma_eta2, rel=1e-14)
    assert np.allclose(derive(rebuilt).alpha, d.alpha, atol=1e-14)


def test_reliability_path():
    env = base_env()
    for rho in (0.2, 0.5, 0.9):
        shifted = reliability_path_env(env, rho)
        assert shifted.rho == pytest.approx(rho, rel=1e-14)
        assert shifted.sigma_x2 == env.sigma_x2
    with pytest.raises(ValueError):
        reliability_path_env(env, 1.0)


def test_reliability_path_shrinks_noise():
    env = base_env()
    # perfect ranking limit: residual variance vanishes, shifts grow
    lo = reliability_path_env(env, 0.3)
    hi = reliability_path_env(env, 0.99)
    assert hi.sigma_eta2 < lo.sigma_eta2
    assert derive(hi).alpha[0] > derive(lo).alpha[0]
