"""Nonstationary peaks-over-threshold modelling with covariate-dependent GPD parameters."""

__version__ = "0.1.0"
