#!/usr/bin/env python3
"""Compare the compiled kernel core against the pure-Python twin.

Times the three hot paths (dual-certificate search, output-length
search, Walsh-Hadamard transform) on representative inputs and prints a
small table.  The two backends are bit-identical; this only measures
speed.  Run:  python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from sdiqrng._kernels import load_backend

REPEATS = 3


def _time(fn, *args):
    best = np.inf
    for _ in range(REPEATS):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_minimize(backend, kind, data, dim, restarts=16, iters=3000):
    rng = np.random.default_rng(7)
    starts = [list(rng.normal(size=dim)) for _ in range(restarts)]

    def run():
        for x0 in starts:
            backend.minimize(kind, data, x0, iters, 1e-13, 1e-11)

    return _time(run)


def bench_wht(backend, n):
    rng = np.random.default_rng(3)
    base = rng.integers(0, 2, size=1 << n).astype(np.int64)

    def run():
        for _ in range(16):
            a = base.copy()
            backend.wht_inplace(a)

    return _time(run)


def main():
    ref = load_backend("python")
    core = load_backend("compiled")
    dual_data = [0.5, 0.5, 0.5, 0.5, 1.0, 0.5, 0.0, 1e8]
    length_data = [0.5, 0.5, 0.5, 0.25, 0.5, 0.25, 0.0, 0.5, 0.95, 0.05, 1e8]
    cases = [
        ("dual search (16 restarts)", lambda b: bench_minimize(b, 1, dual_data, 12)),
        ("length search (16 restarts)", lambda b: bench_minimize(b, 4, length_data, 13)),
        ("WHT 2^16 x16", lambda b: bench_wht(b, 16)),
        ("WHT 2^20 x16", lambda b: bench_wht(b, 20)),
    ]
    print(f"{'case':<28} {'python':>10} {'compiled':>10} {'speedup':>8}")
    for name, fn in cases:
        t_ref = fn(ref)
        if core is None:
            print(f"{name:<28} {t_ref:>9.3f}s {'n/a':>10}")
            continue
        t_core = fn(core)
        print(f"{name:<28} {t_ref:>9.3f}s {t_core:>9.3f}s {t_ref / t_core:>7.1f}x")
    if core is None:
        print("compiled backend unavailable; install with a C compiler to compare")


if __name__ == "__main__":
    main()
