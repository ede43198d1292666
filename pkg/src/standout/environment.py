"""Model primitives and the deterministic constants derived from them.

An :class:`EnvironmentParams` holds everything the user-side model needs:
list length, relevance/noise variances, the Gaussian prior on the page
mean, the outside option and the per-inspection cost.  ``derive`` turns
those into reliability ratio, residual variance, rank quantiles and the
rank-specific shifts; ``interior_condition_slack`` checks that inspecting
the top item is worth its cost.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from .gaussmath import gaussian_upside, std_normal_quantile

QUANTILE_RULES = ("midpoint", "blom")


@dataclass(frozen=True)
class DerivedConstants:
    rho: float
    sigma_z: float
    sigma_eta2: float
    q: np.ndarray      # rank quantiles q_1..q_N
    alpha: np.ndarray  # rank shifts alpha_1..alpha_N


@dataclass(frozen=True)
class EnvironmentParams:
    """Primitives of the inspection environment.

    ``sigma_x2`` and ``sigma_e2`` are the relevance and ranker-noise
    variances, ``(m0, v0)`` the prior on the page mean, ``x_b`` the
    outside option and ``c`` the cost per inspection.
    """

    N: int
    sigma_x2: float
    sigma_e2: float
    v0: float
    m0: float = 0.0
    x_b: float = 0.0
    c: float = 0.1
    quantile_rule: str = "midpoint"
    alpha_override: tuple = None  # explicit rank shifts, bypassing the rule

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        for name in ("sigma_x2", "sigma_e2", "v0", "c"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be > 0")
        if self.quantile_rule not in QUANTILE_RULES:
            raise ValueError(f"quantile_rule must be one of {QUANTILE_RULES}")
        if self.alpha_override is not None:
            if len(self.alpha_override) != self.N:
                raise ValueError("alpha_override must have length N")
            object.__setattr__(self, "alpha_override",
                               tuple(float(a) for a in self.alpha_override))

    @property
    def rho(self) -> float:
        return self.sigma_x2 / (self.sigma_x2 + self.sigma_e2)

    @property
    def sigma_z(self) -> float:
        return math.sqrt(self.sigma_x2 + self.sigma_e2)

    @property
    def sigma_eta2(self) -> float:
        return self.sigma_x2 * (1.0 - self.rho)

    @property
    def sigma_eta(self) -> float:
        return math.sqrt(self.sigma_eta2)

    @classmethod
    def from_dict(cls, d: dict) -> "EnvironmentParams":
        known = {k: d[k] for k in
                 ("N", "sigma_x2", "sigma_e2", "v0", "m0", "x_b", "c",
                  "quantile_rule", "alpha_override")
                 if k in d}
        if known.get("alpha_override") is not None:
            known["alpha_override"] = tuple(known["alpha_override"])
        return cls(**known)

    @classmethod
    def from_json(cls, path: str) -> "EnvironmentParams":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)


def rank_quantiles(N: int, rule: str = "midpoint") -> np.ndarray:
    """Quantiles of the signal distribution assigned to ranks 1..N."""
    i = np.arange(1, N + 1, dtype=np.float64)
    if rule == "midpoint":
        p = 1.0 - i / (N + 1.0)
    elif rule == "blom":
        p = 1.0 - (i - 0.375) / (N + 0.25)
    else:
        raise ValueError(f"unknown quantile rule {rule!r}")
    return np.asarray(std_normal_quantile(p), dtype=np.float64).reshape(N)


def derive(params: EnvironmentParams) -> DerivedConstants:
    """Deterministic constants: rho, sigma_z, sigma_eta^2, q_i, alpha_i."""
    q = rank_quantiles(params.N, params.quantile_rule)
    if params.alpha_override is not None:
        alpha = np.asarray(params.alpha_override, dtype=np.float64)
    else:
        alpha = (params.sigma_x2 / params.sigma_z) * q
    return DerivedConstants(
        rho=params.rho,
        sigma_z=params.sigma_z,
        sigma_eta2=params.sigma_eta2,
        q=q,
        alpha=alpha,
    )


def interior_condition_slack(params: EnvironmentParams) -> float:
    """Expected first-inspection gain minus the cost.

    Positive slack means the user always inspects at least once; negative
    slack admits the no-inspection corner, which the policy and depth
    modules refuse.
    """
    d = derive(params)
    sd = math.sqrt(params.v0 + d.sigma_eta2)
    upside = gaussian_upside(params.m0 + d.alpha[0], sd, params.x_b)
    return float(upside - params.c)


def require_interior(params: EnvironmentParams) -> None:
    slack = interior_condition_slack(params)
    if not slack > 0.0:
        raise ValueError(
            f"environment violates the interior-inspection condition "
            f"(slack = {slack:.6g}); no-inspection corner is not supported"
        )


def env_from_shift_scale(N: int, sigma_eta2: float, alpha_scale: float,
                         v0: float, m0: float, x_b: float, c: float,
                         quantile_rule: str = "midpoint") -> EnvironmentParams:
    """Environment with given residual variance and rank-shift scale.

    Inverts (sigma_eta^2, sigma_x^2/sigma_z) back to (sigma_x^2,
    sigma_e^2); the rank shifts then come out as alpha_i =
    alpha_scale * q_i.  Used by the likelihood module, where calibration
    pins sigma_eta directly while alpha is a fixed property of the
    deployed ranker.
    """
    if not (sigma_eta2 > 0.0 and alpha_scale > 0.0):
        raise ValueError("sigma_eta2 and alpha_scale must be > 0")
    s2 = alpha_scale * alpha_scale
    rho = s2 / (sigma_eta2 + s2)
    sigma_x2 = s2 / rho
    sigma_e2 = s2 * (1.0 - rho) / (rho * rho)
    return EnvironmentParams(N=N, sigma_x2=sigma_x2, sigma_e2=sigma_e2,
                             v0=v0, m0=m0, x_b=x_b, c=c,
                             quantile_rule=quantile_rule)


def reliability_path_env(base: EnvironmentParams, rho: float) -> EnvironmentParams:
    """Rebuild the environment along the fixed-sigma_x reliability path.

    Holds sigma_x^2 fixed and sets sigma_e^2 = sigma_x^2*(1 - rho)/rho so
    the reliability ratio equals ``rho``.
    """
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie strictly in (0, 1)")
    sigma_e2 = base.sigma_x2 * (1.0 - rho) / rho
    return EnvironmentParams(
        N=base.N, sigma_x2=base.sigma_x2, sigma_e2=sigma_e2,
        v0=base.v0, m0=base.m0, x_b=base.x_b, c=base.c,
        quantile_rule=base.quantile_rule,
    )
