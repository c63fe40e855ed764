import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy import stats

from nspot.link import (
    DegenerateShiftError,
    FitData,
    InvalidParameterError,
    LocalGpd,
    ModelIIParams,
    ModelIParams,
    local_arrays,
    log_likelihood,
    log_likelihood_terms,
    log_linear_residual,
    model1_instability_fixture,
    model1_link,
    model2_link,
    shift_threshold,
)

logit = lambda p: math.log(p / (1 - p))  # noqa: E731


def test_model1_examples():
    zero = ModelIParams(np.zeros(3), np.zeros(3), np.zeros(3))
    assert model1_link(zero, [1.0, -3.0, 7.0]) == LocalGpd(1.0, 0.0, 0.5)
    theta = ModelIParams([math.log(2), 0, 0], np.zeros(3), np.zeros(3))
    assert model1_link(theta, [1.0, 0.4, 2.0]).sigma == pytest.approx(2.0)
    theta = ModelIParams(np.zeros(3), np.zeros(3), [logit(0.1), 0, 0])
    assert model1_link(theta, [1.0, 0.4, 2.0]).rho == pytest.approx(0.1)


def test_model2_examples():
    init = ModelIIParams([1, 0, 0], np.zeros(3), np.zeros(3), np.zeros(3))
    local = model2_link(init, 37.0, [1.0, 2.0, -1.0])
    assert (local.sigma, local.xi) == (1.0, 0.0)
    theta = ModelIIParams([1.0], [0.5], [math.log(2)], [0.0])
    local = model2_link(theta, 2.0, [1.0])
    assert local.sigma == pytest.approx(4.0) and local.xi == pytest.approx(1.0)
    with pytest.raises(InvalidParameterError):
        model2_link(ModelIIParams([1.0], [-0.2], [0.0], [0.0]), 10.0, [1.0])


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        model1_link(ModelIParams(np.zeros(2), np.zeros(2), np.zeros(2)), [1.0, 2.0, 3.0])


def test_shift_examples():
    shifted = shift_threshold(LocalGpd(2.0, 0.5, 0.2), 2.0)
    assert shifted.sigma == pytest.approx(3.0) and shifted.xi == 0.5
    assert shifted.rho == pytest.approx(0.2 * 1.5 ** -2)
    local = LocalGpd(1.0, 0.0, 0.1)
    assert shift_threshold(local, 0.0) is local
    assert shift_threshold(local, 1.0).rho == pytest.approx(0.1 * math.exp(-1))
    with pytest.raises(DegenerateShiftError):
        shift_threshold(LocalGpd(1.0, -0.5, 0.1), 2.0)


coef = st.floats(-1.0, 1.0)


@settings(max_examples=300, deadline=None)
@given(a=st.lists(coef, min_size=3, max_size=3), b=st.lists(coef, min_size=3, max_size=3),
       g=st.lists(coef, min_size=3, max_size=3), c=st.lists(st.floats(-2, 2), min_size=2, max_size=2),
       u=st.floats(0.0, 50.0), x=st.floats(0.0, 20.0))
def test_threshold_stability(a, b, g, c, u, x):
    theta = ModelIIParams(a, b, g, [0.0, 0.0, 0.0])
    ct = np.r_[1.0, c]
    try:
        base = model2_link(theta, u, ct)
        moved = model2_link(theta, u + x, ct)
    except InvalidParameterError:
        assume(False)
    try:
        shifted = shift_threshold(base, x)
    except DegenerateShiftError:
        assume(False)
    assert shifted.sigma == pytest.approx(moved.sigma, rel=1e-12, abs=1e-300)
    assert shifted.xi == pytest.approx(moved.xi, rel=1e-12)


def test_model1_is_not_threshold_stable():
    fx = model1_instability_fixture()
    assert abs(log_linear_residual(fx["theta"], fx["points"], fx["x"])) > 1e-3
    # with a zero shape the shift leaves log sigma linear
    flat = ModelIParams(fx["theta"].s_u, [0.0, 0.0], fx["theta"].r_u)
    assert abs(log_linear_residual(flat, fx["points"], fx["x"])) < 1e-12


def test_likelihood_examples():
    zero = np.zeros(3)
    # one non-exceedance with rho = 0.5
    assert log_likelihood(zero, "model1", _rows(1.0), 5.0) == pytest.approx(math.log(0.5))
    # one exceedance at the threshold itself: density 1/sigma = 1
    assert log_likelihood(zero, "model1", _rows(5.0 + 1e-12), 5.0) == pytest.approx(math.log(0.5), abs=1e-11)
    assert log_likelihood(zero, "model1", [], 5.0) == 0.0


def _rows(y):
    from nspot.features import DesignRow

    return [DesignRow(None, y, np.array([1.0]), y > 5.0, None)]


def oracle_loglik(kind, theta, C, y, u):
    """Per-row loop using scipy's genpareto; independent of the package's vector code."""
    p = C.shape[1]
    total = 0.0
    for c, yt in zip(C, y):
        if kind == "model1":
            s, k, r = theta[:p], theta[p:2 * p], theta[2 * p:]
            sigma, xi = math.exp(s @ c), k @ c
        else:
            a, b, g, r = theta[:p], theta[p:2 * p], theta[2 * p:3 * p], theta[3 * p:]
            v = a @ c + u * (b @ c)
            if v <= 0:
                return -math.inf
            sigma, xi = v * math.exp(g @ c), (b @ c) * math.exp(g @ c)
        eta = r @ c
        rho = 1.0 / (1.0 + math.exp(-eta))
        if yt > u:
            dens = stats.genpareto.logpdf(yt - u, xi, scale=sigma)
            total += math.log(rho) + dens
        else:
            total += math.log1p(-rho)
    return total


@pytest.mark.parametrize("kind", ["model1", "model2"])
@pytest.mark.parametrize("seed", range(8))
def test_likelihood_matches_oracle(kind, seed):
    rng = np.random.default_rng(seed)
    n, p, u = 50, 3, 4.0
    C = np.column_stack([np.ones(n), rng.normal(size=(n, p - 1))])
    y = np.where(rng.random(n) < 0.4, u + rng.exponential(1.0, n), rng.uniform(0, u, n))
    if kind == "model1":
        theta = np.r_[rng.normal(0, 0.3, p), rng.normal(0, 0.05, p), rng.normal(0, 0.5, p)]
    else:
        theta = np.r_[5.0, rng.normal(0, 0.1, p - 1), 0.05, 0, 0, rng.normal(0, 0.05, p), rng.normal(0, 0.5, p)]
    expected = oracle_loglik(kind, theta, C, y, u)
    assert math.isfinite(expected)
    assert log_likelihood(theta, kind, _design(C, y, u), u) == pytest.approx(expected, abs=1e-10)
    assert np.sum(log_likelihood_terms(theta, kind, C, y, u)) == pytest.approx(expected, abs=1e-10)


def _design(C, y, u):
    from nspot.features import DesignMatrix

    return DesignMatrix([None] * len(y), y, C, [f"c{j}" for j in range(1, C.shape[1])], u, "no2", None)


def test_support_and_constraint_give_minus_infinity():
    C = np.array([[1.0], [1.0]])
    y = np.array([10.0, 1.0])
    # xi = -0.5, sigma = 1: endpoint at 2, exceedance of 5 is outside
    assert log_likelihood([0.0, -0.5, 0.0], "model1", _design(C, y, 5.0), 5.0) == -math.inf
    # alpha + u beta = 1 - 5 * 0.3 < 0
    assert log_likelihood([1.0, -0.3, 0.0, 0.0], "model2", _design(C, y, 5.0), 5.0) == -math.inf


@settings(max_examples=60, deadline=None)
@given(r0=st.floats(-3, 3), d=st.floats(0.01, 1.0), exceed=st.booleans())
def test_likelihood_monotone_in_rho(r0, d, exceed):
    C = np.array([[1.0]])
    y = np.array([6.0 if exceed else 1.0])
    lo = log_likelihood([0.0, 0.1, r0], "model1", _design(C, y, 5.0), 5.0)
    hi = log_likelihood([0.0, 0.1, r0 + d], "model1", _design(C, y, 5.0), 5.0)
    assert (hi > lo) if exceed else (hi < lo)


def test_likelihood_smoothness():
    """Central differences at step h and h/2 agree (Richardson check of smoothness)."""
    rng = np.random.default_rng(9)
    n, p, u = 200, 3, 4.0
    C = np.column_stack([np.ones(n), rng.normal(size=(n, p - 1))])
    y = np.where(rng.random(n) < 0.3, u + rng.exponential(1.0, n), rng.uniform(0, u, n))
    data = FitData.from_arrays(C, y, u)
    for kind, theta in (("model1", np.r_[0.1, 0.2, -0.1, 0.05, 0.02, 0.0, -0.8, 0.3, 0.1]),
                        ("model2", np.r_[3.0, 0.2, 0.1, 0.05, 0, 0, 0, 0.1, -0.1, -0.8, 0.3, 0.1])):
        k = 1 if kind == "model1" else 2
        for j in range(len(theta)):
            e = np.zeros_like(theta)
            e[j] = 1.0

            def diff(h):
                return (data.loglik(k, theta + h * e) - data.loglik(k, theta - h * e)) / (2 * h)

            d1, d2 = diff(1e-4), diff(5e-5)
            assert d1 == pytest.approx(d2, rel=1e-5, abs=1e-6)


def test_rate_gradient_is_exact():
    rng = np.random.default_rng(4)
    n, p, u = 300, 4, 2.0
    C = np.column_stack([np.ones(n), rng.normal(size=(n, p - 1))])
    y = np.where(rng.random(n) < 0.3, u + 1.0, 0.5)
    data = FitData.from_arrays(C, y, u)
    r = rng.normal(0, 0.5, p)
    grad = np.empty(p)
    value = data.rate_loglik(r, grad)
    rho = 1 / (1 + np.exp(-(C @ r)))
    ex = y > u
    assert value == pytest.approx(np.sum(np.log(rho[ex])) + np.sum(np.log1p(-rho[~ex])), rel=1e-12)
    np.testing.assert_allclose(grad, C.T @ (ex - rho), rtol=1e-10, atol=1e-10)


def test_positivity_cache_agrees_with_scan():
    rng = np.random.default_rng(8)
    C = np.column_stack([np.ones(500), rng.normal(size=(500, 2))])
    data = FitData.from_arrays(C, np.zeros(500), 1.0)
    w = np.array([3.0, 0.2, -0.1])
    for _ in range(300):
        w = w + rng.normal(0, 0.05, 3)
        assert data.positive_everywhere(w) == bool(np.min(C @ w) > 0)


def test_local_arrays_match_scalar_links():
    rng = np.random.default_rng(2)
    C = np.column_stack([np.ones(20), rng.normal(size=(20, 2))])
    theta = np.r_[2.0, 0.1, 0.2, 0.1, 0, 0, 0, 0.2, -0.1, -1.0, 0.5, 0.0]
    sigma, xi, rho, valid = local_arrays("model2", theta, 3.0, C)
    params = ModelIIParams.from_vector(theta)
    for i, c in enumerate(C):
        local = model2_link(params, 3.0, c)
        assert valid[i]
        assert (sigma[i], xi[i], rho[i]) == pytest.approx((local.sigma, local.xi, local.rho), rel=1e-14)
