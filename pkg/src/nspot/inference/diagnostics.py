"""Goodness-of-fit and classification diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import gpd
from ..link import ModelKind, local_arrays


class PosteriorLink:
    """Fitted link averaged over posterior draws.

    ``theta_draws`` are effective (masked) coefficients on the standardized
    scale; inputs ``C`` are raw design rows, standardized internally.
    Functionals are averaged per draw, so a single-row ``theta_draws`` is
    a plain plug-in link.
    """

    def __init__(self, kind, theta_draws, u, standardizer=None):
        self.kind = ModelKind.parse(kind)
        self.theta = np.atleast_2d(np.asarray(theta_draws, dtype=float))
        self.u = float(u)
        self.standardizer = standardizer

    def _std(self, C):
        C = np.atleast_2d(np.asarray(C, dtype=float))
        return C if self.standardizer is None else self.standardizer.transform(C)

    def locals(self, C, draw):
        return local_arrays(self.kind, self.theta[draw], self.u, self._std(C))

    def _average(self, C, fn):
        C = self._std(C)
        acc = np.zeros(len(C))
        valid_all = np.ones(len(C), dtype=bool)
        for theta in self.theta:
            sigma, xi, rho, valid = local_arrays(self.kind, theta, self.u, C)
            acc += np.where(valid, fn(sigma, xi, rho), 0.0)
            valid_all &= valid
        return acc / len(self.theta), valid_all

    def rho(self, C):
        return self._average(C, lambda s, x, r: r)[0]

    def survival(self, C, excess):
        excess = np.asarray(excess, dtype=float)
        return self._average(C, lambda s, x, r: gpd.survival(excess, s, x))

    def quantile(self, C, q):
        """Posterior-mean conditional excess quantile at survival level ``q``."""
        return self._average(C, lambda s, x, r: gpd.quantile(np.full(len(s), q), s, x))[0]


def pit_transform(excess, C, evaluator):
    """Survival-scale PIT of observed excesses; zeros flag out-of-support rows.

    Returns ``(w, out_of_support)``.
    """
    excess = np.asarray(excess, dtype=float)
    if np.any(excess < 0):
        raise ValueError("pit_transform expects exceedances (non-negative excesses)")
    w, valid = evaluator.survival(C, excess)
    w = np.clip(w, 0.0, 1.0)
    return w, ((w == 0.0) & (excess > 0)) | ~valid


def kolmogorov_sf(lam, tol=1e-12):
    """P(K > lam) for the limiting Kolmogorov distribution."""
    if lam <= 0:
        return 1.0
    if lam < 1.0:
        # theta-function form converges fast for small arguments
        total = 0.0
        k = 1
        while True:
            term = math.exp(-((2 * k - 1) ** 2) * math.pi ** 2 / (8 * lam * lam))
            total += term
            if term < tol:
                break
            k += 1
        cdf = math.sqrt(2 * math.pi) / lam * total
        return min(1.0, max(0.0, 1.0 - cdf))
    total = 0.0
    k = 1
    while True:
        term = math.exp(-2.0 * k * k * lam * lam)
        total += term if k % 2 else -term
        if term < tol:
            break
        k += 1
    return min(1.0, max(0.0, 2.0 * total))


def ks_uniform_test(sample):
    """One-sample KS test against U(0, 1); asymptotic p-value."""
    x = np.sort(np.asarray(sample, dtype=float))
    n = len(x)
    if n == 0:
        raise ValueError("KS test of an empty sample")
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - x), np.max(x - (i - 1) / n)))
    return d, kolmogorov_sf(math.sqrt(n) * d)


def misclassification(labels, rho):
    """Cutoff on fitted ``rho`` minimizing false positives plus false negatives.

    Candidates are 0 and every distinct fitted value; a row is classed as
    extreme when ``rho > cutoff``. Ties go to the larger cutoff. Returns
    ``(cutoff, rate)``.
    """
    labels = np.asarray(labels, dtype=bool)
    rho = np.asarray(rho, dtype=float)
    n = len(rho)
    if n == 0:
        raise ValueError("no rows to classify")
    cand = np.unique(np.concatenate([[0.0], rho]))
    pos = np.sort(rho[labels])
    neg = np.sort(rho[~labels])
    false_neg = np.searchsorted(pos, cand, side="right")
    false_pos = len(neg) - np.searchsorted(neg, cand, side="right")
    errors = false_neg + false_pos
    best = np.flatnonzero(errors == errors.min())[-1]
    return float(cand[best]), float(errors[best]) / n


def qq_envelope(excess, C, evaluator, random_source, n_replicates=100, level=0.95):
    """Observed vs simulated ordered excesses with pointwise envelopes.

    Each replicate picks a posterior draw at random and simulates one
    excess per exceedance row from that draw's local GPD.
    """
    excess = np.sort(np.asarray(excess, dtype=float))
    n = len(excess)
    sims = np.empty((n_replicates, n))
    n_draws = len(evaluator.theta)
    for r in range(n_replicates):
        draw = int(random_source.integers(n_draws))
        sigma, xi, _, valid = evaluator.locals(C, draw)
        q = 1.0 - random_source.random(n)
        sims[r] = np.sort(np.where(valid, gpd.quantile(q, sigma, xi), np.nan))
    tail = (1 - level) / 2
    lower, median, upper = np.nanquantile(sims, [tail, 0.5, 1 - tail], axis=0)
    return {"rank": np.arange(1, n + 1), "observed": excess, "simulated_median": median,
            "lower": lower, "upper": upper}


@dataclass
class FitDiagnostics:
    pit_values: np.ndarray
    ks_statistic: float
    ks_p_value: float
    misclassification_rate: float
    optimal_class_threshold: float
    n_out_of_support: int = 0
    n_rows: int = 0
    n_exceedances: int = 0

    def __post_init__(self):
        if np.any((self.pit_values < 0) | (self.pit_values > 1)):
            raise ValueError("PIT values must lie in [0, 1]")

    def to_dict(self):
        return {
            "ks_statistic": self.ks_statistic,
            "ks_p_value": self.ks_p_value,
            "misclassification_rate": self.misclassification_rate,
            "optimal_class_threshold": self.optimal_class_threshold,
            "n_out_of_support": self.n_out_of_support,
            "n_rows": self.n_rows,
            "n_exceedances": self.n_exceedances,
        }


def fit_diagnostics(design, evaluator):
    """PIT/KS on the exceedances and the misclassification scan on all rows."""
    exceed = design.exceeds
    if not exceed.any():
        raise ValueError("no exceedances to assess")
    excess = design.response[exceed] - design.u
    w, flagged = pit_transform(excess, design.C[exceed], evaluator)
    d, pval = ks_uniform_test(w)
    cutoff, rate = misclassification(exceed, evaluator.rho(design.C))
    return FitDiagnostics(w, d, pval, rate, cutoff, int(flagged.sum()), len(design), int(exceed.sum()))
