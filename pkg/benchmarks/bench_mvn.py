"""Compare the compiled and numpy kernels of the equicoordinate integral.

Usage::

    python3 benchmarks/bench_mvn.py [--repeat 20] [--L 2 4]

For each design (``L`` binary covariates, balanced groups) it times one
integrand evaluation over a fixed point set and one full critical value solve
per kernel, and checks that both kernels return the same numbers.
"""

import argparse
import timeit

import numpy as np

from submaxsens import mvnorm
from submaxsens.mvnorm import _points, _size_points, critical_value_bracket, sov_factor, DEFAULT_MVN
from submaxsens.submax import build_comparisons, correlation


def balanced_rho(L):
    C = build_comparisons(L).C.astype(float)
    return correlation(C @ C.T)


def bench(L, repeat, alpha=0.05):
    rho = balanced_rho(L)
    f = sov_factor(rho)
    lo, hi = critical_value_bracket(rho.shape[0], alpha)
    mvnorm.set_backend("python")
    pts, p_lo, _, _ = _size_points(f, lo, DEFAULT_MVN)
    args = (f.lead, f.coef, f.scale, f.upper, f.rank, pts)
    rows = []
    ref = None
    for name, kern in sorted(mvnorm.KERNELS.items()):
        t_eval = min(timeit.repeat(lambda: kern.shift_means(2.0, *args), number=1, repeat=repeat))
        t_solve = min(timeit.repeat(lambda: kern.solve(1 - alpha, lo, hi, 1e-4, 100, *args, p_lo),
                                    number=1, repeat=repeat))
        kappa = kern.solve(1 - alpha, lo, hi, 1e-4, 100, *args, p_lo)[0]
        if ref is None:
            ref = kappa
        rows.append((name, t_eval, t_solve, kappa, abs(kappa - ref)))
    n = pts.shape[0] * pts.shape[1]
    print(f"L={L} K={rho.shape[0]} rank={f.rank} points={n}")
    print(f"  {'kernel':<8} {'eval ms':>9} {'solve ms':>9} {'ns/point':>9} {'kappa':>9} {'|diff|':>9}")
    for name, te, ts, k, diff in rows:
        print(f"  {name:<8} {te * 1e3:9.3f} {ts * 1e3:9.3f} {te / n * 1e9:9.1f} {k:9.5f} {diff:9.1e}")
    if len(rows) == 2:
        print(f"  speedup (python/cython): eval {rows[1][1] / rows[0][1]:.2f}x, solve {rows[1][2] / rows[0][2]:.2f}x")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=20)
    p.add_argument("--L", type=int, nargs="+", default=[2, 3, 4])
    args = p.parse_args()
    if "cython" not in mvnorm.KERNELS:
        print("compiled kernel not built; only the numpy kernel is timed")
    prev = mvnorm.backend()
    try:
        for L in args.L:
            bench(L, args.repeat)
    finally:
        mvnorm.set_backend(prev)


if __name__ == "__main__":
    main()
