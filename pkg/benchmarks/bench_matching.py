#!/usr/bin/env python3
"""Benchmark the k-nearest-control kernel: numba JIT vs pure numpy.

Runs the same matching workload through both backends, checks the outputs
are identical, and prints a timing table. The numpy path is the fallback
selected by PSMW_NUMBA=0; this script shows what that choice costs.

Usage: python benchmarks/bench_matching.py [--sizes 500,2000,8000] [--k 5]
"""

import argparse
import time

import numpy as np

from psm_workbench.kernels import matching_numpy

try:
    from psm_workbench.kernels import matching_numba
except ImportError:
    matching_numba = None


def workload(n, seed):
    rng = np.random.default_rng(seed)
    n_t = n // 2
    n_c = n - n_t
    ts = np.sort(rng.beta(2, 3, n_t))[::-1].copy()  # processing order: descending
    cs = np.sort(rng.beta(3, 2, n_c))
    ranks = rng.permutation(n_c).astype(np.int64)
    caliper = 0.2 * float(np.log(cs / (1 - cs)).std())
    return ts, cs, ranks, caliper


def timed(fn, *args, repeats=5):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--sizes", default="500,2000,8000")
    parser.add_argument("--k", type=int, default=5)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    if matching_numba is None:
        print("numba unavailable: benchmarking the numpy backend only")

    print(f"{'n units':>8} {'numpy':>12} {'numba':>12} {'speedup':>9}   identical")
    for n in sizes:
        ts, cs, ranks, caliper = workload(n, seed=n)
        t_np, out_np = timed(matching_numpy.knn_match, ts, cs, ranks,
                             args.k, caliper, True, repeats=args.repeats)
        if matching_numba is None:
            print(f"{n:>8} {t_np * 1e3:>10.2f}ms {'-':>12} {'-':>9}")
            continue
        matching_numba.knn_match(ts, cs, ranks, args.k, caliper, True)  # JIT warm-up
        t_nb, out_nb = timed(matching_numba.knn_match, ts, cs, ranks,
                             args.k, caliper, True, repeats=args.repeats)
        same = (np.array_equal(out_np[0], out_nb[0])
                and np.array_equal(out_np[1], out_nb[1]))
        print(f"{n:>8} {t_np * 1e3:>10.2f}ms {t_nb * 1e3:>10.2f}ms "
              f"{t_np / t_nb:>8.1f}x   {same}")
        if not same:
            raise SystemExit("backends disagree; this is a bug")


if __name__ == "__main__":
    main()
