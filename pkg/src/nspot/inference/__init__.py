"""Post-fit analysis: diagnostics, simulation, return levels and comparison."""

from .comparison import bayes_log_factor, dic, draw_log_likelihoods, harmonic_mean_log_ml
from .crossval import CrossValidationResult, cross_validate, split_by_month
from .diagnostics import (
    FitDiagnostics,
    PosteriorLink,
    fit_diagnostics,
    ks_uniform_test,
    misclassification,
    pit_transform,
    qq_envelope,
)
from .simulation import (
    OBS_PER_YEAR,
    ReturnLevelEstimate,
    conditional_return_level,
    horizon_to_p,
    marginal_return_level,
    posterior_conditional_return_level,
    scenario_reduced_flow,
    simulate_sequence,
)

__all__ = [
    "OBS_PER_YEAR",
    "CrossValidationResult",
    "FitDiagnostics",
    "PosteriorLink",
    "ReturnLevelEstimate",
    "bayes_log_factor",
    "conditional_return_level",
    "cross_validate",
    "dic",
    "draw_log_likelihoods",
    "fit_diagnostics",
    "harmonic_mean_log_ml",
    "horizon_to_p",
    "ks_uniform_test",
    "marginal_return_level",
    "misclassification",
    "pit_transform",
    "posterior_conditional_return_level",
    "qq_envelope",
    "scenario_reduced_flow",
    "simulate_sequence",
    "split_by_month",
]
