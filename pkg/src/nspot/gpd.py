"""Generalized Pareto distribution for threshold excesses.

All functions accept scalars or numpy arrays for the value argument. The
array-level helpers (``survival``, ``log_density``, ``quantile``) also
broadcast over ``sigma`` and ``xi`` and are what the rest of the package
uses in vectorized code; the ``gpd_*`` functions take a validated
:class:`GpdParams`.

The exponential limit is used whenever ``|xi| < XI_EPS``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

XI_EPS = 1e-8


class UnboundedQuantileError(ValueError):
    """Raised for the zero survival level of an unbounded distribution."""


class UndefinedMeanError(ValueError):
    """Raised when the mean does not exist (xi >= 1)."""


@dataclass(frozen=True)
class GpdParams:
    sigma: float
    xi: float

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be finite and > 0, got {self.sigma!r}")
        if not math.isfinite(self.xi):
            raise ValueError(f"xi must be finite, got {self.xi!r}")

    @property
    def upper_endpoint(self) -> float:
        """Right end of the support (``inf`` unless ``xi < 0``)."""
        if self.xi < 0 and abs(self.xi) >= XI_EPS:
            return self.sigma / -self.xi
        return math.inf


def _as_output(values, *inputs):
    if all(np.ndim(a) == 0 for a in inputs):
        return float(values)
    return values


def survival(x, sigma, xi):
    """P(X > x) for excesses ``x >= 0``; exactly 0 at/after a finite endpoint."""
    x, sigma, xi = np.broadcast_arrays(
        np.asarray(x, dtype=float), np.asarray(sigma, dtype=float), np.asarray(xi, dtype=float)
    )
    small = np.abs(xi) < XI_EPS
    xi_safe = np.where(small, 1.0, xi)
    w = xi_safe * x / sigma
    inside = w > -1.0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        general = np.exp(-np.log1p(np.where(inside, w, 0.0)) / xi_safe)
    out = np.where(small, np.exp(-x / sigma), np.where(inside, general, 0.0))
    out = np.where(x <= 0, 1.0, out)
    return _as_output(out, x, sigma, xi)


def log_density(x, sigma, xi):
    """Log density; ``-inf`` outside the open support (including the endpoint)."""
    x, sigma, xi = np.broadcast_arrays(
        np.asarray(x, dtype=float), np.asarray(sigma, dtype=float), np.asarray(xi, dtype=float)
    )
    small = np.abs(xi) < XI_EPS
    xi_safe = np.where(small, 1.0, xi)
    z = x / sigma
    w = xi_safe * z
    inside = (w > -1.0) & (x >= 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        general = -np.log(sigma) - (1.0 + 1.0 / xi_safe) * np.log1p(np.where(inside, w, 0.0))
        limit = -np.log(sigma) - z
    out = np.where(small, np.where(x >= 0, limit, -np.inf), np.where(inside, general, -np.inf))
    return _as_output(out, x, sigma, xi)


def quantile(q, sigma, xi):
    """Inverse survival: the excess ``x`` with ``survival(x) == q``.

    ``q = 0`` maps to the upper endpoint for ``xi < 0`` and raises
    :class:`UnboundedQuantileError` otherwise.
    """
    q, sigma, xi = np.broadcast_arrays(
        np.asarray(q, dtype=float), np.asarray(sigma, dtype=float), np.asarray(xi, dtype=float)
    )
    if np.any((q < 0) | (q > 1)):
        raise ValueError("survival level must lie in [0, 1]")
    small = np.abs(xi) < XI_EPS
    if np.any((q == 0) & (small | (xi > 0))):
        raise UnboundedQuantileError("zero survival level has no finite quantile for xi >= 0")
    xi_safe = np.where(small, 1.0, xi)
    with np.errstate(divide="ignore"):
        logq = np.log(q)
        # expm1 keeps precision when xi*log(q) is tiny
        general = sigma * np.expm1(-xi_safe * logq) / xi_safe
    out = np.where(small, -sigma * logq, general)
    return _as_output(out, q, sigma, xi)


def gpd_survival(x, params: GpdParams):
    return survival(x, params.sigma, params.xi)


def gpd_log_density(x, params: GpdParams):
    return log_density(x, params.sigma, params.xi)


def gpd_quantile(q, params: GpdParams):
    return quantile(q, params.sigma, params.xi)


def gpd_sample(random_source, params: GpdParams, size=None):
    """Inverse-transform draw(s).

    ``random_source`` is either a :class:`numpy.random.Generator` or any
    zero-argument callable returning a uniform on (0, 1).
    """
    if isinstance(random_source, np.random.Generator):
        u = random_source.random(size)
        # Generator.random is on [0, 1); reflect to (0, 1]
        u = 1.0 - u
    else:
        if size is not None:
            u = np.array([random_source() for _ in range(int(np.prod(size)))]).reshape(size)
        else:
            u = random_source()
    return quantile(u, params.sigma, params.xi)


def gpd_mean(params: GpdParams) -> float:
    if params.xi >= 1:
        raise UndefinedMeanError(f"GPD mean is undefined for xi={params.xi} >= 1")
    return params.sigma / (1.0 - params.xi)


def gpd_median(params: GpdParams) -> float:
    if abs(params.xi) < XI_EPS:
        return params.sigma * math.log(2.0)
    return params.sigma * math.expm1(params.xi * math.log(2.0)) / params.xi
