"""Benchmark the numba kernels against their pure-numpy fallbacks.

Both paths must produce identical results; this script asserts that while
timing them. Run from the repository root:

    python benchmarks/bench_kernels.py

PROCF_NO_NUMBA=1 would disable the jitted path entirely, so run without it.
"""

import time

import numpy as np

from procf import _kernels


def time_calls(fn, args_list, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for args in args_list:
            fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_levenshtein(rng):
    print("== levenshtein (int-coded sequences) ==")
    for n, length in ((2000, 8), (2000, 25), (200, 120)):
        pairs = [
            (rng.integers(0, 6, size=length).astype(np.int64),
             rng.integers(0, 6, size=length).astype(np.int64))
            for _ in range(n)
        ]
        for a, b in pairs[:50]:
            assert _kernels.levenshtein_jit(a, b) == _kernels.levenshtein_np(a, b)
        _kernels.levenshtein_jit(*pairs[0])  # warm the jit
        t_jit = time_calls(_kernels.levenshtein_jit, pairs)
        t_np = time_calls(_kernels.levenshtein_np, pairs)
        print(f"  {n} pairs, length {length:>3}: jit {t_jit*1e3:8.2f} ms   "
              f"numpy {t_np*1e3:8.2f} ms   speedup {t_np/t_jit:5.1f}x")


def bench_best_split(rng):
    print("== best gini split of a sorted column ==")
    for n_rows, n_cols in ((600, 50), (2000, 50), (20000, 10)):
        args_list = []
        for _ in range(n_cols):
            vals = np.sort(rng.random(n_rows))
            y = rng.integers(0, 3, size=n_rows).astype(np.int64)
            args_list.append((vals, y, 3, 5))
        for args in args_list[:20]:
            assert _kernels.best_split_jit(*args) == _kernels.best_split_np(*args)
        _kernels.best_split_jit(*args_list[0])
        t_jit = time_calls(_kernels.best_split_jit, args_list)
        t_np = time_calls(_kernels.best_split_np, args_list)
        print(f"  {n_cols} columns x {n_rows:>5} rows: jit {t_jit*1e3:8.2f} ms   "
              f"numpy {t_np*1e3:8.2f} ms   speedup {t_np/t_jit:5.1f}x")


def main():
    if not _kernels.USING_NUMBA:
        raise SystemExit("numba path is disabled (PROCF_NO_NUMBA set or numba missing)")
    rng = np.random.default_rng(0)
    bench_levenshtein(rng)
    bench_best_split(rng)
    print("results identical on both paths")


if __name__ == "__main__":
    main()
