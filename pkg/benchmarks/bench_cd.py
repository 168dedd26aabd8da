"""Benchmark the compiled coordinate-descent kernel against the pure-Python twin.

Times full penalized path fits (the kernel's real workload) for several
problem sizes and penalty families, and checks that both backends produce
identical coefficients.

Run: python3 benchmarks/bench_cd.py
"""

from __future__ import annotations

import time

import numpy as np

from logitbench import _cd_py
from logitbench._kernels import HAVE_COMPILED, cd_sweeps as compiled_cd
from logitbench.errors import NoConvergence
from logitbench.penalized import PenaltySpec, fit_path, lambda_path

SIZES = [(200, 10), (500, 50), (400, 200)]
FAMILIES = ["lasso", "elastic_net", "mcp", "scad", "ridge"]


def make_problem(n, p, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[: max(3, p // 10)] = rng.normal(0, 1.2, max(3, p // 10))
    eta = X @ beta
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
    return X, y


def time_backend(kernel, X, y, spec, lambdas):
    from logitbench import _kernels

    original = _kernels.cd_sweeps
    _kernels.cd_sweeps = kernel
    try:
        t0 = time.perf_counter()
        coefs = fit_path(X, y, spec, lambdas)
        return time.perf_counter() - t0, coefs
    finally:
        _kernels.cd_sweeps = original


def main():
    if not HAVE_COMPILED:
        print("compiled kernel unavailable; nothing to compare")
        return
    print(f"{'n x p':>12} {'family':>12} {'compiled':>10} {'pure-py':>10} "
          f"{'speedup':>8} {'max |diff|':>12}")
    for n, p in SIZES:
        X, y = make_problem(n, p, seed=n + p)
        for family in FAMILIES:
            spec = PenaltySpec(family)
            lambdas = lambda_path(X, y, spec, L=30)
            try:
                tc, cc = time_backend(compiled_cd, X, y, spec, lambdas)
                tp, cp = time_backend(_cd_py.cd_sweeps, X, y, spec, lambdas)
            except NoConvergence as exc:
                print(f"{n:>6} x {p:<4} {family:>12}   skipped ({exc})")
                continue
            diff = float(np.max(np.abs(cc - cp)))
            print(f"{n:>6} x {p:<4} {family:>12} {tc:>9.3f}s {tp:>9.3f}s "
                  f"{tp / tc:>7.1f}x {diff:>12.2e}")


if __name__ == "__main__":
    main()
