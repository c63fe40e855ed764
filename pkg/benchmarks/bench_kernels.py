"""Compiled vs numpy kernels: likelihood and simulation timings.

    python benchmarks/bench_kernels.py [--rows 50000] [--covariates 3] [--repeat 200]

Prints one line per kernel with the mean time per call for each backend,
the speedup and the largest difference between the two results.
"""

import argparse
import time

import numpy as np

from nspot import kernels
from nspot.inference.simulation import Trajectory, linear_blocks
from nspot.link import FitData
from nspot.synth import synthetic_regression


def per_call(fn, repeat):
    fn()
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat


def model2_theta(m):
    p = m + 1
    a = np.r_[6.0, np.full(m, 0.2)]
    b = np.r_[0.1, np.zeros(m)]
    g = np.r_[0.0, np.full(m, 0.05)]
    r = np.r_[-2.2, np.full(m, 0.1)]
    return np.concatenate([a, b, g, r]), p


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=50_000)
    ap.add_argument("--covariates", type=int, default=3)
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--sim-steps", type=int, default=200_000)
    args = ap.parse_args(argv)

    if kernels.compiled is None:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
    fast, slow = kernels.compiled, kernels.python
    theta2, p = model2_theta(args.covariates)
    theta1 = np.concatenate([np.r_[np.log(5.0), np.zeros(args.covariates)],
                             np.r_[0.1, np.zeros(args.covariates)], theta2[3 * p:]])
    design = synthetic_regression("model2", theta2, args.rows, 10.0, np.random.default_rng(0))
    fd = FitData.from_design(design)
    r = np.ascontiguousarray(theta2[3 * p:])
    grad = np.empty(p)

    cases = {
        "loglik model1": lambda k: k.loglik_model1(fd.CT, fd.CeT, fd.ye, fd.csum_e, theta1)[1],
        "loglik model2": lambda k: k.loglik_model2(fd.CT, fd.CeT, fd.ye, fd.csum_e, theta2, 10.0)[1],
        "rate + gradient": lambda k: k.rate_part(fd.CT, fd.csum_e, r, grad),
        "tail model2": lambda k: k.tail_model2(fd.CT, fd.CeT, fd.ye, theta2, 10.0)[1],
    }
    print(f"rows={args.rows} exceedances={fd.n_exceed} p={p}")
    print(f"{'kernel':<18}{'compiled':>12}{'numpy':>12}{'speedup':>9}{'max diff':>11}")
    for name, fn in cases.items():
        t_fast = per_call(lambda: fn(fast), args.repeat)
        t_slow = per_call(lambda: fn(slow), max(args.repeat // 10, 5))
        diff = abs(fn(fast) - fn(slow))
        print(f"{name:<18}{t_fast * 1e6:>10.1f}us{t_slow * 1e6:>10.1f}us{t_slow / t_fast:>8.1f}x{diff:>11.1e}")

    pool = np.ascontiguousarray(10.0 * np.random.default_rng(1).random(5000))
    traj = Trajectory(np.ascontiguousarray(design.C[:5000]), np.empty(0, dtype=np.int64), np.empty(0),
                      np.empty(0), np.empty(0), pool, np.empty(0, dtype=np.int64), np.zeros(5000))
    eta, lag_coef = linear_blocks("model2", theta2, traj)
    n = args.sim_steps
    rng = np.random.default_rng(2)
    draws = (rng.random(n), 1.0 - rng.random(n), rng.random(n))

    def simulate(k):
        out = np.empty(n)
        exceeded = np.empty(n, dtype=np.uint8)
        k.simulate_path(2, 10.0, eta, lag_coef, traj.lag_mu, traj.lag_sd, traj.pool, traj.pool_offsets,
                        traj.fallback, *draws, np.empty(0), 0, out, exceeded)
        return out

    t_fast = per_call(lambda: simulate(fast), 5)
    t_slow = per_call(lambda: simulate(slow), 2)
    diff = float(np.max(np.abs(simulate(fast) - simulate(slow))))
    print(f"{'simulate path':<18}{t_fast * 1e3:>10.2f}ms{t_slow * 1e3:>10.2f}ms{t_slow / t_fast:>8.1f}x{diff:>11.1e}"
          f"   ({n} steps)")


if __name__ == "__main__":
    main()
