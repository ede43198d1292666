"""Inspection-depth distribution and the session simulator.

Under the predictive measure the lead is a Markov chain with a closed-form
transition density, so the depth pmf follows from propagating the
surviving lead law one epoch at a time.  The simulator draws full
sessions (conditional on a page mean or marginalized over the prior) and
serves as the brute-force oracle for the recursion, the survival regions
and the A/B analysis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .belief import posterior_variance
from .environment import EnvironmentParams, derive, require_interior
from .gaussmath import std_normal_cdf, std_normal_pdf
from .policy import PolicyTable

DEFAULT_CELLS = 4001


def _epoch_constants(env: EnvironmentParams, t: int):
    """(omega_t, sigma*_{t-1}, alpha_t) for the epoch-t lead transition."""
    v_prev = posterior_variance(t - 1, env.v0, env.sigma_eta2)
    omega = v_prev / (v_prev + env.sigma_eta2)
    sd = np.sqrt(v_prev + env.sigma_eta2)
    alpha_t = derive(env).alpha[t - 1]
    return omega, sd, alpha_t


def lead_kernel_density(l_prev, y, t: int, env: EnvironmentParams):
    """Transition density of the lead chain at epoch t >= 1.

    Supported on [L_min(l), inf) with L_min(l) = (1-omega_t)*l +
    omega_t*alpha_t; the two terms are the discovery branch (scale
    (1-omega_t)*sigma*) and the disappointment branch (scale
    omega_t*sigma*).
    """
    if t < 1:
        raise ValueError("lead kernel is defined for epochs t >= 1")
    omega, sd, alpha_t = _epoch_constants(env, t)
    l_prev = np.asarray(l_prev, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    l_min = (1.0 - omega) * l_prev + omega * alpha_t
    s_disc = (1.0 - omega) * sd
    s_dis = omega * sd
    dens = (std_normal_pdf((y - alpha_t) / s_disc) / s_disc
            + std_normal_pdf((l_prev - y) / s_dis) / s_dis)
    out = np.where(y >= l_min, dens, 0.0)
    return out if np.ndim(out) else float(out)


def lead_kernel_cdf(l_prev, y, t: int, env: EnvironmentParams):
    """P(L_t <= y | L_{t-1} = l); closed form from the two-branch density."""
    omega, sd, alpha_t = _epoch_constants(env, t)
    l_prev = np.asarray(l_prev, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    l_min = (1.0 - omega) * l_prev + omega * alpha_t
    s_disc = (1.0 - omega) * sd
    s_dis = omega * sd
    cdf = (std_normal_cdf((y - alpha_t) / s_disc)
           - std_normal_cdf((l_prev - y) / s_dis))
    out = np.where(y <= l_min, 0.0, cdf)
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class DepthDistribution:
    """pmf over tau = 0..N plus the per-epoch surviving lead measures."""

    pmf: np.ndarray
    survival_grids: list
    survival_masses: list
    measure: str  # "predictive" or "conditional(mu)"

    @property
    def N(self) -> int:
        return len(self.pmf) - 1

    def expected_depth(self) -> float:
        return float(np.dot(np.arange(len(self.pmf)), self.pmf))


def depth_distribution(env: EnvironmentParams, table: PolicyTable,
                       cells: int = DEFAULT_CELLS) -> DepthDistribution:
    """Exact depth pmf under the predictive measure via the lead recursion.

    The surviving lead law starts as an atom at x_b - m0; each epoch the
    stopping mass is the law's weight on [r_t, inf) and the rest is pushed
    through the lead kernel.  Cell masses are exact kernel-CDF differences
    between cell edges, so total mass is conserved to rounding.
    """
    require_interior(env)
    N = env.N
    pmf = np.zeros(N + 1)
    grids, masses = [], []

    r = table.reservation
    l0 = env.x_b - env.m0
    pmf[0] = 1.0 if l0 >= r[0] else 0.0  # zero under the interior condition
    if pmf[0] == 1.0:
        return DepthDistribution(pmf, grids, masses, "predictive")

    # surviving measure as point masses at cell centers
    centers = np.array([l0])
    weights = np.array([1.0])

    for t in range(1, N + 1):
        omega, sd, alpha_t = _epoch_constants(env, t)
        survive_mass = weights.sum()
        if t == N:
            pmf[N] = survive_mass
            break
        # grid over the continuation region (-inf mass is bounded below by
        # the chain's support: L_min is increasing in l)
        l_min = (1.0 - omega) * centers.min() + omega * alpha_t
        lo = min(l_min, r[t]) - 1e-12
        edges = np.linspace(lo, r[t], cells + 1)
        # mass landing in each cell, per source, via CDF differences
        cdf_edges = lead_kernel_cdf(centers[:, None], edges[None, :], t, env)
        cell_mass = weights @ np.diff(cdf_edges, axis=1)
        stop_mass = survive_mass - weights @ cdf_edges[:, -1]
        pmf[t] = stop_mass
        centers = 0.5 * (edges[:-1] + edges[1:])
        weights = cell_mass
        grids.append(centers)
        masses.append(weights)
        if weights.sum() <= 0.0:
            break

    leak = abs(pmf.sum() - 1.0)
    if leak > 1e-6:
        raise ArithmeticError(
            f"depth recursion leaked probability mass ({leak:.3g}); "
            f"cells={cells}, N={N}")
    return DepthDistribution(pmf, grids, masses, "predictive")


@dataclass(frozen=True)
class SessionBatch:
    """Column-wise batch of simulated sessions."""

    mu: np.ndarray       # (n,) page means
    x: np.ndarray        # (n, N) relevances in rank order
    depth: np.ndarray    # (n,) stopping epochs tau
    J: np.ndarray        # (n,) terminal choice, 0 = outside option
    payoff: np.ndarray   # (n,) M_tau - c*tau

    def __len__(self):
        return len(self.depth)

    def depth_pmf(self, N: int) -> np.ndarray:
        return np.bincount(self.depth, minlength=N + 1) / len(self.depth)


def simulate_sessions(env: EnvironmentParams, table: PolicyTable,
                      mu_mode="draw_from_prior", n: int = 1000, seed: int = 0,
                      order: str = "rank") -> SessionBatch:
    """Simulate full sessions under the standout rule.

    ``mu_mode`` is either ``"draw_from_prior"`` or a fixed float; ``order``
    is ``"rank"`` for the optimal top-down traversal or ``"random"`` for a
    diagnostic policy inspecting a uniformly random uninspected rank with
    the same thresholds (dominated in expectation).
    """
    require_interior(env)
    if n < 1:
        raise ValueError("n must be >= 1")
    N = env.N
    alpha = derive(env).alpha
    rng = np.random.default_rng(np.random.Philox(key=seed))
    z = rng.standard_normal((n, N + 1))

    if mu_mode == "draw_from_prior":
        mu = env.m0 + np.sqrt(env.v0) * z[:, 0]
    else:
        mu = np.full(n, float(mu_mode))
    eta = env.sigma_eta * z[:, 1:]

    if order == "rank":
        rank_at = np.broadcast_to(np.arange(N), (n, N))
    elif order == "random":
        rank_at = np.argsort(rng.random((n, N)), axis=1)
    else:
        raise ValueError("order must be 'rank' or 'random'")
    # relevance revealed at inspection step k: rank rank_at[:, k]
    x_seq = mu[:, None] + alpha[rank_at] + eta

    v = np.array([posterior_variance(t, env.v0, env.sigma_eta2) for t in range(N + 1)])
    m = np.full(n, env.m0)
    M = np.full(n, env.x_b)
    depth = np.full(n, N, dtype=np.int64)
    active = np.ones(n, dtype=bool)

    if env.x_b - env.m0 >= table.reservation[0]:
        raise AssertionError("interior environment must not stop at tau = 0")

    for t in range(1, N + 1):
        x_t = x_seq[:, t - 1]
        bias = alpha[rank_at[:, t - 1]]
        m_new = (v[t] / v[t - 1]) * m + (v[t] / env.sigma_eta2) * (x_t - bias)
        m = np.where(active, m_new, m)
        M = np.where(active, np.maximum(M, x_t), M)
        if t < N:
            stop_now = active & (M - m >= table.reservation[t])
        else:
            stop_now = active
        depth[stop_now] = t
        active &= ~stop_now

    # relevances in rank order, masked beyond depth for J / payoff purposes
    x_rank = np.empty((n, N))
    rows = np.arange(n)[:, None]
    x_rank[rows, rank_at] = x_seq

    # inspected relevances per session (in rank order only meaningful for
    # order="rank"; J is the argmax over inspected items either way)
    steps = np.arange(1, N + 1)[None, :]
    inspected = steps <= depth[:, None]
    cand = np.where(inspected, x_seq, -np.inf)
    best_step = np.argmax(cand, axis=1)
    best_val = cand[np.arange(n), best_step]
    J = np.where(best_val > env.x_b, rank_at[np.arange(n), best_step] + 1, 0)
    M_tau = np.maximum(env.x_b, best_val)
    payoff = M_tau - env.c * depth

    return SessionBatch(mu=mu, x=x_rank, depth=depth, J=J, payoff=payoff)


def conditional_depth_pmf_n2(env: EnvironmentParams, table: PolicyTable,
                             mu: float) -> np.ndarray:
    """Closed-form depth pmf for N = 2 conditional on the true page mean.

    The session continues past rank 1 iff x_1 lands in the first-stop
    continuation interval, and x_1 | mu ~ N(mu + alpha_1, sigma_eta^2).
    """
    from .firststop import classify_first_stop  # local import, no cycle at runtime

    if env.N != 2:
        raise ValueError("closed form requires N = 2")
    report = classify_first_stop(env, table)
    if report.regime == "trust":
        p_continue = 0.0
    else:
        a1 = derive(env).alpha[0]
        se = env.sigma_eta
        p_continue = float(
            std_normal_cdf((report.s1_plus - mu - a1) / se)
            - std_normal_cdf((report.s1_minus - mu - a1) / se))
    return np.array([0.0, 1.0 - p_continue, p_continue])


def position_propensity(dist: DepthDistribution) -> np.ndarray:
    """Examination propensities p_i = P(tau >= i) for i = 1..N."""
    tail = np.cumsum(dist.pmf[::-1])[::-1]
    return tail[1:]
