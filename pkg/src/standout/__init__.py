"""Bayesian rational-inspection model of ranked-list search.

A searcher walks a ranked list top-down, learns the page quality from
each inspected item, and stops when the best option so far beats the
option value of looking deeper.  The package exposes the belief
dynamics, myopic and optimal stopping thresholds, the exact
inspection-depth law, first-stop and A/B depth analysis, survival
polyhedra over inspected relevances, and a session likelihood for
fitting feature-based relevance models to depth-and-conversion logs.
"""

from .belief import BeliefState, bayes_weight, initial_state, posterior_variance, update
from .environment import (DerivedConstants, EnvironmentParams, derive,
                          env_from_shift_scale, interior_condition_slack,
                          rank_quantiles, reliability_path_env, require_interior)
from .gaussmath import g, g_inverse, gaussian_upside
from .policy import PolicyTable, myopic_table, optimal_table, should_stop
from .firststop import FirstStopReport, classify_first_stop, winners_curse_scan
from .depthlaw import (DepthDistribution, SessionBatch, depth_distribution,
                       simulate_sessions)
from .abtest import ABReport, ab_report, expected_depth
from .survival import (StoppingSet, SurvivalRegion, build_survival_region,
                       conversion_region, conversion_set, membership,
                       membership_batch, stopping_set)
from .likelihood import (AffineFeatureModel, FitResult, LikelihoodContext,
                         RankerProfile, SessionRecord, UserPrimitives,
                         calibrate, fit, nll_objective, session_likelihood,
                         simulate_records)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
