import math

import numpy as np
import pytest

from nspot import kernels
from nspot.link import FitData

pytestmark = pytest.mark.skipif(kernels.compiled is None, reason="compiled kernels not built")


@pytest.fixture(scope="module")
def data():
    rng = np.random.default_rng(17)
    n, p, u = 3000, 4, 10.0
    C = np.column_stack([np.ones(n), rng.normal(size=(n, p - 1))])
    y = np.where(rng.random(n) < 0.2, u + rng.exponential(2.0, n), rng.uniform(0, u, n))
    return FitData.from_arrays(C, y, u)


def thetas(p, rng, count=20):
    for _ in range(count):
        m1 = np.r_[rng.normal(0.5, 0.3), rng.normal(0, 0.1, p - 1), rng.normal(0.05, 0.05, p),
                   rng.normal(-1.5, 0.3), rng.normal(0, 0.3, p - 1)]
        m2 = np.r_[rng.normal(4.0, 0.5), rng.normal(0, 0.3, p - 1), rng.normal(0.05, 0.05), np.zeros(p - 1),
                   0.0, rng.normal(0, 0.1, p - 1), rng.normal(-1.5, 0.3), rng.normal(0, 0.3, p - 1)]
        yield m1, m2


def test_backends_agree_on_loglik(data):
    rng = np.random.default_rng(1)
    for m1, m2 in thetas(data.p, rng):
        for kind, theta in ((1, m1), (2, m2)):
            fast = kernels.loglik(kind, data.CT, data.CeT, data.ye, data.csum_e, theta, data.u, kernels.compiled)
            slow = kernels.loglik(kind, data.CT, data.CeT, data.ye, data.csum_e, theta, data.u, kernels.python)
            if math.isinf(slow):
                assert fast == slow
            else:
                assert fast == pytest.approx(slow, rel=1e-12, abs=1e-9)


def test_tail_plus_rate_is_loglik(data):
    rng = np.random.default_rng(2)
    p = data.p
    for m1, m2 in thetas(p, rng, 5):
        for backend in (kernels.compiled, kernels.python):
            for kind, theta in ((1, m1), (2, m2)):
                whole = kernels.loglik(kind, data.CT, data.CeT, data.ye, data.csum_e, theta, data.u, backend)
                parts = (kernels.tail(kind, data.CT, data.CeT, data.ye, theta, data.u, backend)
                         + kernels.rate(data.CT, data.csum_e, np.ascontiguousarray(theta[-p:]), None, backend))
                assert parts == pytest.approx(whole, rel=1e-13, abs=1e-9)


def test_rate_gradient_backends_and_finite_difference(data):
    rng = np.random.default_rng(3)
    r = rng.normal(0, 0.4, data.p)
    grads = {}
    for backend in (kernels.compiled, kernels.python):
        g = np.empty(data.p)
        kernels.rate(data.CT, data.csum_e, r, g, backend)
        grads[backend.name] = g
    np.testing.assert_allclose(grads["compiled"], grads["python"], rtol=1e-11, atol=1e-9)
    h = 1e-6
    for j in range(data.p):
        e = np.zeros(data.p)
        e[j] = h
        fd = (kernels.rate(data.CT, data.csum_e, r + e) - kernels.rate(data.CT, data.csum_e, r - e)) / (2 * h)
        assert fd == pytest.approx(grads["compiled"][j], rel=1e-5, abs=1e-4)


def test_constraint_check_and_min_linear(data):
    w = np.array([1.0, 0.5, -0.2, 0.1])
    expected = float(np.min(data.CT.T @ w))
    for backend in (kernels.compiled, kernels.python):
        assert kernels.min_linear(data.CT, w, backend) == pytest.approx(expected, rel=1e-14)
    # alpha = -1 everywhere breaks the Model II constraint in both backends
    theta = np.r_[-1.0, np.zeros(data.p - 1), np.zeros(3 * data.p)]
    for backend in (kernels.compiled, kernels.python):
        assert kernels.tail(2, data.CT, data.CeT, data.ye, theta, data.u, backend) == -math.inf


def test_simulate_path_backends_agree():
    rng = np.random.default_rng(5)
    n, steps = 400, 20_000
    eta = np.ascontiguousarray(np.column_stack([np.full(n, 3.0), np.full(n, 0.05), rng.normal(0, 0.1, n),
                                                rng.normal(-2.0, 0.5, n)]))
    lag_coef = np.ascontiguousarray(np.array([[0.1], [0.0], [0.02], [0.3]]))
    lag_mu, lag_sd = np.array([5.0]), np.array([3.0])
    pool = np.ascontiguousarray(rng.uniform(0, 10, 500))
    draws = (rng.random(steps), 1.0 - rng.random(steps), rng.random(steps))
    results = []
    for backend in (kernels.compiled, kernels.python):
        out = np.empty(steps)
        exc = np.empty(steps, dtype=np.uint8)
        status, _ = backend.simulate_path(2, 10.0, eta, lag_coef, lag_mu, lag_sd, pool, np.empty(0, dtype=np.int64),
                                          np.zeros(n), *draws, np.array([4.0]), 7, out, exc)
        assert status == 0
        results.append((out, exc))
    np.testing.assert_allclose(results[0][0], results[1][0], rtol=1e-12)
    np.testing.assert_array_equal(results[0][1], results[1][1])
    assert 0 < results[0][1].sum() < steps
