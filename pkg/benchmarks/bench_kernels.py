"""Timing comparison of the compiled kernels against their pure-python bodies.

Usage: python benchmarks/bench_kernels.py [--steps N]

Runs each hot kernel once to trigger compilation, then times the jitted
function against its uncompiled ``py_func`` on identical inputs. With
SAMLAB_NO_NUMBA=1 there is only one path and the script says so.
"""

import argparse
import time

import numpy as np

from samlab import kernels
from samlab._accel import NUMBA_ENABLED
from samlab.datasets import gen_sparse_regression
from samlab.models import QuadraticObjective
from samlab.optim import batch_order


def _time(fn, *args, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_diag_flow(steps):
    data = gen_sparse_regression(d=30, n=20, k=3, seed=0)
    X = np.ascontiguousarray(data.X)
    XT = np.ascontiguousarray(data.X.T)
    alpha = np.full(30, 0.05)
    rows = []
    for name, method in (("gd", kernels.GD), ("nsam", kernels.NSAM),
                         ("onesam", kernels.ONESAM)):
        args = (X, XT, data.y, alpha.copy(), alpha.copy(), 0.02, 0.02, method,
                steps, 0.0, 10_000)
        rows.append((f"diag_flow/{name}", args, kernels.diag_flow))
    return rows


def bench_diag_stochastic(steps):
    data = gen_sparse_regression(d=30, n=20, k=3, seed=0)
    X = np.ascontiguousarray(data.X)
    XT = np.ascontiguousarray(data.X.T)
    alpha = np.full(30, 0.01)
    bi = batch_order(20, 1, steps, seed=0)
    bj = batch_order(20, 1, steps, seed=1)
    rows = []
    for name, method in (("sgd", kernels.S_SGD), ("msam", kernels.S_MSAM),
                         ("nsam_fresh", kernels.S_NSAM_FRESH)):
        args = (X, XT, data.y, alpha.copy(), alpha.copy(), 1 / 30, 1 / 30,
                method, bi, bj, steps + 1, 0.0)
        rows.append((f"diag_stochastic/{name}", args, kernels.diag_stochastic))
    return rows


def bench_quad(steps):
    problem = QuadraticObjective.random(d=16, n=32, beta_smooth=1.0, mu=0.1,
                                        sigma=0.5, seed=0)
    batches = batch_order(32, 4, steps, seed=0, sampling="iid")
    fresh = batch_order(32, 4, steps, seed=1, sampling="iid")
    gammas = np.full(steps, 0.3)
    rhos = np.full(steps, 0.1)
    args = (problem.A, problem.zeta, problem.w_star, np.zeros(16),
            gammas, rhos, batches, fresh, kernels.S_MSAM)
    return [("quad_msam", args, kernels.quad_msam)]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=200_000)
    opts = parser.parse_args()

    if not NUMBA_ENABLED:
        print("numba is disabled (SAMLAB_NO_NUMBA set or not installed); "
              "only the pure-numpy path exists, nothing to compare.")
        return

    cases = (bench_diag_flow(opts.steps) + bench_diag_stochastic(opts.steps)
             + bench_quad(opts.steps))
    print(f"{opts.steps} steps per kernel, best of 3")
    print(f"{'kernel':28s} {'jit':>10s} {'python':>10s} {'speedup':>8s}")
    for name, args, fn in cases:
        fn(*args)  # compile outside the timed region
        jit_t = _time(fn, *args)
        py_t = _time(fn.py_func, *args, repeats=1)
        print(f"{name:28s} {jit_t:9.3f}s {py_t:9.3f}s {py_t / jit_t:7.1f}x")


if __name__ == "__main__":
    main()
