"""Glue between the design, the sampler and the fitted posterior."""

from __future__ import annotations

from dataclasses import dataclass

from . import kernels
from .features import DesignMatrix, Standardizer, empirical_quantile_threshold
from .inference.diagnostics import PosteriorLink
from .link import FitData
from .sampler import ChainConfig, ModelTarget, PosteriorSampleSet, run_chains


def resolve_threshold(responses, threshold=None, quantile=None):
    """Explicit threshold, or the empirical quantile of the responses."""
    if (threshold is None) == (quantile is None):
        raise ValueError("set exactly one of threshold and threshold_quantile")
    if threshold is not None:
        return float(threshold)
    return empirical_quantile_threshold(responses, quantile)


@dataclass
class FittedModel:
    samples: PosteriorSampleSet
    design: DesignMatrix
    standardizer: Standardizer
    data: FitData

    @property
    def kind(self):
        return self.samples.kind

    def link(self):
        return PosteriorLink(self.kind, self.samples.effective(), self.design.u, self.standardizer)


def prepare_fit_data(design, standardize=True):
    std = Standardizer.fit(design.C, design.names) if standardize else Standardizer.identity(design.m, design.names)
    return std, FitData.from_design(design, std)


def make_target(chain: ChainConfig, data, design, kind=None):
    return ModelTarget(kind or chain.kind, data, chain.beta_intercept_only, chain.pin_gamma_intercept,
                       covariate_names=design.names)


def fit_design(design: DesignMatrix, chain: ChainConfig, kind=None, standardize=True) -> FittedModel:
    """Standardize, build the likelihood target and run the configured chains."""
    std, data = prepare_fit_data(design, standardize)
    if data.n_exceed == 0:
        raise ValueError(f"no exceedances of the threshold u={design.u}")
    samples = run_chains(chain, make_target(chain, data, design, kind))
    samples.meta.update({
        "threshold": design.u,
        "target_pollutant": design.target,
        "n_rows": len(design),
        "n_exceedances": int(data.n_exceed),
        "standardizer": std.to_dict(),
        "backend": kernels.BACKEND,
    })
    return FittedModel(samples, design, std, data)


def attach(samples: PosteriorSampleSet, design: DesignMatrix) -> FittedModel:
    """Rebuild the fitted model around a posterior read back from disk."""
    if list(samples.covariate_names) != list(design.names):
        raise ValueError("posterior covariates do not match the design built from the current config")
    std = Standardizer.from_dict(samples.meta["standardizer"])
    return FittedModel(samples, design, std, FitData.from_design(design, std))
