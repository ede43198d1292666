"""Closed-form analysis of the first inspection.

Classifies an environment into the trust regime (the user stops at rank 1
for every realization) or the explore regime (a continuation interval
(s1-, s1+) of mediocre first draws), with the exact one-inspection
probability, its diffuse-prior limit, and the reliability scan behind the
winner's-curse starvation result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .belief import bayes_weight
from .environment import (EnvironmentParams, derive, interior_condition_slack,
                          reliability_path_env, require_interior)
from .gaussmath import std_normal_cdf
from .policy import PolicyTable, myopic_table, optimal_table


@dataclass(frozen=True)
class FirstStopReport:
    regime: str               # "trust" | "explore"
    s1_minus: float           # -inf in the trust regime
    s1_plus: float            # +inf in the trust regime
    p_tau1: float
    p_cut_losses: float
    p_commit: float


def first_stop_endpoints(env: EnvironmentParams, kappa1: float):
    """Continuation-interval endpoints (s1-, s1+) of the explore regime."""
    a = derive(env).alpha
    omega1 = bayes_weight(1, env)
    s_minus = env.m0 + a[0] - (env.m0 + a[1] + kappa1 - env.x_b) / omega1
    s_plus = env.m0 + a[0] + (kappa1 - (a[0] - a[1])) / (1.0 - omega1)
    return float(s_minus), float(s_plus)


def classify_first_stop(env: EnvironmentParams, table: PolicyTable) -> FirstStopReport:
    """Trust/explore classification with the exact P(tau = 1).

    In the explore regime the probability splits into the cut-losses mass
    below s1- and the commit mass above s1+, both under the predictive law
    N(m0 + alpha_1, v0 + sigma_eta^2) of the first draw.
    """
    require_interior(env)
    if env.N == 1:
        return FirstStopReport("trust", -math.inf, math.inf, 1.0, 0.0, 0.0)
    a = derive(env).alpha
    omega1 = bayes_weight(1, env)
    kappa1 = float(table.kappa[1])
    trust = a[0] - a[1] >= kappa1 + (1.0 - omega1) * (env.m0 + a[0] - env.x_b)
    if trust:
        return FirstStopReport("trust", -math.inf, math.inf, 1.0, 0.0, 0.0)
    s_minus, s_plus = first_stop_endpoints(env, kappa1)
    sd = math.sqrt(env.v0 + env.sigma_eta2)
    mean1 = env.m0 + a[0]
    p_cut = float(std_normal_cdf((s_minus - mean1) / sd))
    p_commit = float(std_normal_cdf((mean1 - s_plus) / sd))
    return FirstStopReport("explore", s_minus, s_plus,
                           p_cut + p_commit, p_cut, p_commit)


def diffuse_first_stop(env: EnvironmentParams, table: PolicyTable, mu: float) -> float:
    """P(tau = 1 | mu) in the diffuse-prior limit v0 -> inf.

    The commit branch dies (s1+ -> inf); only the cut-losses branch
    survives, unless the trust condition alpha_1 - alpha_2 >= kappa*_1
    already forces a stop.
    """
    if env.N < 2:
        return 1.0
    a = derive(env).alpha
    kappa1 = float(table.kappa[1])
    if a[0] - a[1] >= kappa1:
        return 1.0
    return float(std_normal_cdf((env.x_b - mu - a[1] - kappa1) / env.sigma_eta))


def winners_curse_scan(base: EnvironmentParams, rho_grid, policy: str = "optimal"):
    """Rebuild the environment along the reliability path and classify.

    Returns a list of dicts (rho, interior, trust_holds, p_tau1) plus the
    smallest grid rho at which the trust condition holds; rho values where
    the interior condition fails are flagged and skipped.
    """
    results = []
    first_trust = None
    for rho in rho_grid:
        env = reliability_path_env(base, float(rho))
        if interior_condition_slack(env) <= 0.0:
            results.append({"rho": float(rho), "interior": False,
                            "trust_holds": None, "p_tau1": None})
            continue
        table = optimal_table(env) if policy == "optimal" else myopic_table(env)
        report = classify_first_stop(env, table)
        trust = report.regime == "trust"
        if trust and first_trust is None:
            first_trust = float(rho)
        results.append({"rho": float(rho), "interior": True,
                        "trust_holds": trust, "p_tau1": report.p_tau1})
    return results, first_trust
