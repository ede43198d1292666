"""Conjugate posterior dynamics over the page mean and the lead.

The posterior after ``t`` inspections is Gaussian with a deterministic
variance schedule (precisions add) and a mean that is affine in the
bias-corrected observations.  States are immutable; ``update`` returns a
new state so paths can be coupled in tests.
"""

from __future__ import annotations

from dataclasses import dataclass

from .environment import EnvironmentParams, derive


@dataclass(frozen=True)
class BeliefState:
    """Posterior (m, v) on the page mean plus the running max and lead."""

    t: int
    m: float
    v: float
    M: float

    @property
    def lead(self) -> float:
        return self.M - self.m


def posterior_variance(t: int, v0: float, sigma_eta2: float) -> float:
    return 1.0 / (1.0 / v0 + t / sigma_eta2)


def bayes_weight(t: int, env: EnvironmentParams) -> float:
    """Weight omega_t = v_{t-1}/(v_{t-1} + sigma_eta^2) on observation t."""
    if t < 1:
        raise ValueError("bayes_weight is defined for t >= 1")
    v_prev = posterior_variance(t - 1, env.v0, env.sigma_eta2)
    return v_prev / (v_prev + env.sigma_eta2)


def initial_state(env: EnvironmentParams) -> BeliefState:
    return BeliefState(t=0, m=env.m0, v=env.v0, M=env.x_b)


def update(state: BeliefState, x_next: float, env: EnvironmentParams) -> BeliefState:
    """Fold the relevance revealed at rank ``state.t + 1`` into the belief."""
    if state.t >= env.N:
        raise ValueError("cannot update past the horizon")
    alpha = derive(env).alpha
    a_next = alpha[state.t]  # rank t+1, 0-indexed
    v_new = 1.0 / (1.0 / state.v + 1.0 / env.sigma_eta2)
    m_new = (v_new / state.v) * state.m + (v_new / env.sigma_eta2) * (x_next - a_next)
    return BeliefState(t=state.t + 1, m=m_new, v=v_new, M=max(state.M, x_next))


def predictive(state: BeliefState, env: EnvironmentParams):
    """Mean and variance of the next rank's relevance before inspection."""
    if state.t >= env.N:
        raise ValueError("no next rank beyond the horizon")
    alpha = derive(env).alpha
    return state.m + alpha[state.t], state.v + env.sigma_eta2


def diffuse_posterior_mean(inspected, env: EnvironmentParams) -> float:
    """Bias-corrected sample mean over (rank, x) pairs: the v0 -> inf limit."""
    if not inspected:
        raise ValueError("diffuse_posterior_mean needs at least one observation")
    alpha = derive(env).alpha
    total = 0.0
    for rank, x in inspected:
        total += x - alpha[rank - 1]
    return total / len(inspected)
