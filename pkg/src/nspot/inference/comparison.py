"""Model comparison: Bayes factor and DIC from posterior draws."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..link import FitData, ModelKind

ESS_FLOOR = 10.0


def draw_log_likelihoods(samples, data: FitData):
    """Log-likelihood of every draw's effective coefficients."""
    kind = ModelKind.parse(samples.kind)
    return np.array([data.loglik(kind, theta) for theta in samples.effective()])


def _logsumexp(a):
    a = np.asarray(a, dtype=float)
    top = np.max(a)
    return float(top + np.log(np.sum(np.exp(a - top))))


def _ess(log_w):
    w = np.exp(log_w - np.max(log_w))
    return float(w.sum() ** 2 / np.sum(w * w))


@dataclass(frozen=True)
class MarginalLikelihood:
    log_value: float
    method: str
    ess: float
    n_used: int

    @property
    def unstable(self):
        return self.ess < ESS_FLOOR

    def to_dict(self):
        return {"log_marginal_likelihood": self.log_value, "method": self.method, "ess": self.ess,
                "n_used": self.n_used, "unstable": self.unstable}


def harmonic_mean_log_ml(log_liks, truncate=0.1):
    """Harmonic-mean estimate after dropping the lowest-likelihood fraction.

    The reciprocal-likelihood weights are dominated by the poorest draws;
    discarding the bottom ``truncate`` share stabilizes the estimate at the
    cost of a small upward bias.
    """
    ll = np.sort(np.asarray(log_liks, dtype=float))
    if ll.size == 0 or not np.all(np.isfinite(ll)):
        raise ValueError("harmonic mean needs finite log-likelihoods")
    drop = int(math.floor(truncate * ll.size))
    kept = ll[drop:]
    log_ml = -(_logsumexp(-kept) - math.log(kept.size))
    return MarginalLikelihood(log_ml, "harmonic_mean", _ess(-kept), int(kept.size))


def bridge_log_ml(samples, data: FitData, random_source, n_proposal=None, max_iter=1000, tol=1e-10,
                  fixed=None):
    """Bridge-sampling estimate with a Gaussian proposal fitted to the draws.

    Flat priors make the target the likelihood itself. Coordinates in
    ``fixed`` (or with zero posterior variance) are held at their values.
    """
    if samples.indicators is not None:
        raise ValueError("bridge sampling needs a fixed-model posterior (variable selection off)")
    kind = ModelKind.parse(samples.kind)
    draws = samples.effective()
    sd = draws.std(axis=0)
    moving = sd > 0 if fixed is None else (~np.asarray(fixed, dtype=bool)) & (sd > 0)
    X = draws[:, moving]
    mean = X.mean(axis=0)
    cov = np.atleast_2d(np.cov(X, rowvar=False))
    chol = np.linalg.cholesky(cov + 1e-12 * np.eye(len(mean)))
    d = len(mean)
    log_det = 2.0 * np.sum(np.log(np.diag(chol)))

    def log_g(x):
        z = np.linalg.solve(chol, (x - mean).T)
        return -0.5 * np.sum(z * z, axis=0) - 0.5 * log_det - 0.5 * d * math.log(2 * math.pi)

    def log_q(x):
        full = np.tile(draws[0], (len(x), 1))
        full[:, moving] = x
        return np.array([data.loglik(kind, t) for t in full])

    n1 = len(X)
    n2 = n_proposal or n1
    Y = mean + random_source.standard_normal((n2, d)) @ chol.T
    l1 = log_q(X) - log_g(X)
    l2 = log_q(Y) - log_g(Y)
    s1, s2 = n1 / (n1 + n2), n2 / (n1 + n2)
    shift = np.median(l1)
    e1, e2 = l1 - shift, l2 - shift
    log_r = 0.0
    for _ in range(max_iter):
        num = _logsumexp(e2 - np.logaddexp(math.log(s1) + e2, math.log(s2) + log_r)) - math.log(n2)
        den = _logsumexp(-np.logaddexp(math.log(s1) + e1, math.log(s2) + log_r)) - math.log(n1)
        new = num - den
        if abs(new - log_r) < tol:
            log_r = new
            break
        log_r = new
    finite = l2[np.isfinite(l2)]
    ess = _ess(finite) if finite.size else 0.0
    return MarginalLikelihood(float(log_r + shift), "bridge", ess, n1)


def evidence_category(beta):
    """Verbal scale for 2 ln B (sign says which model is favoured)."""
    a = abs(beta)
    if a < 2:
        label = "weak"
    elif a < 5:
        label = "positive"
    elif a < 10:
        label = "strong"
    else:
        label = "very strong"
    return label


@dataclass(frozen=True)
class BayesFactorResult:
    beta_21: float
    category: str
    favours: str
    ml_model1: MarginalLikelihood
    ml_model2: MarginalLikelihood

    def to_dict(self):
        return {"beta_21": self.beta_21, "category": self.category, "favours": self.favours,
                "model1": self.ml_model1.to_dict(), "model2": self.ml_model2.to_dict(),
                "unstable": self.ml_model1.unstable or self.ml_model2.unstable}


def bayes_log_factor(samples_m1, samples_m2, data: FitData, method="harmonic", truncate=0.1,
                     random_source=None):
    """beta_21 = 2 ln(ML(Model II) / ML(Model I)) on identical data."""
    if ModelKind.parse(samples_m1.kind) is not ModelKind.MODEL1:
        raise ValueError("first posterior must be Model I")
    if ModelKind.parse(samples_m2.kind) is not ModelKind.MODEL2:
        raise ValueError("second posterior must be Model II")
    if method == "harmonic":
        ml1 = harmonic_mean_log_ml(draw_log_likelihoods(samples_m1, data), truncate)
        ml2 = harmonic_mean_log_ml(draw_log_likelihoods(samples_m2, data), truncate)
    elif method == "bridge":
        rng = random_source or np.random.default_rng(0)
        ml1 = bridge_log_ml(samples_m1, data, rng)
        ml2 = bridge_log_ml(samples_m2, data, rng)
    else:
        raise ValueError("method must be 'harmonic' or 'bridge'")
    beta = 2.0 * (ml2.log_value - ml1.log_value)
    favours = "model2" if beta > 0 else "model1" if beta < 0 else "neither"
    return BayesFactorResult(beta, evidence_category(beta), favours, ml1, ml2)


@dataclass(frozen=True)
class DicResult:
    dic: float
    mean_deviance: float
    p_d: float
    plug_in: str

    def to_dict(self):
        return {"dic": self.dic, "mean_deviance": self.mean_deviance, "p_d": self.p_d,
                "plug_in": self.plug_in}


def dic(samples, data: FitData, log_liks=None):
    """DIC = mean deviance + p_D, with p_D = mean deviance - deviance(posterior mean).

    Falls back to the componentwise posterior median when the posterior
    mean breaks the Model II constraint; ``plug_in`` records which was used.
    """
    kind = ModelKind.parse(samples.kind)
    ll = draw_log_likelihoods(samples, data) if log_liks is None else np.asarray(log_liks)
    d_bar = float(np.mean(-2.0 * ll))
    eff = samples.effective()
    plug_in = "mean"
    ll_hat = data.loglik(kind, eff.mean(axis=0))
    if not math.isfinite(ll_hat):
        plug_in = "median"
        ll_hat = data.loglik(kind, np.median(eff, axis=0))
        if not math.isfinite(ll_hat):
            raise ValueError("neither the posterior mean nor the median gives a finite likelihood")
    p_d = d_bar + 2.0 * ll_hat
    return DicResult(d_bar + p_d, d_bar, p_d, plug_in)
