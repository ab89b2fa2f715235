#!/usr/bin/env python3
"""Benchmark the numba kernels against their pure-numpy fallbacks.

Usage: python benchmarks/bench_kernels.py [--repeats N]

Times the three hot kernels (gate decisions, threshold utility surface,
Laplacian responses) under both backends and prints a speedup table.
The first numba call of each kernel is excluded (JIT warmup).
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from srgate import kernels


def _time(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def make_cases(rng):
    n = 1_000_000
    p = rng.random(n)
    c = rng.integers(0, 2, n).astype(np.uint8)
    tau_high = np.full(n, 0.85)

    ns = 20_000
    ps = rng.random(ns)
    cs = rng.integers(0, 2, ns).astype(np.uint8)
    util = rng.normal(0, 0.3, size=(ns, 3))
    grid = np.arange(0.0, 1.0001, 0.05)
    pairs = [(lo, hi) for lo in grid for hi in grid if lo < hi]
    lo_arr = np.array([x for x, _ in pairs])
    hi_arr = np.array([y for _, y in pairs])

    img = rng.random((1024, 1024))

    return {
        "gate_levels (n=1e6)": lambda: kernels.gate_levels(p, c, 0.6, tau_high, 0.7),
        f"utility_surface ({ns} rec x {len(pairs)} pairs)": lambda: kernels.utility_surface(
            ps, cs, util, lo_arr, hi_arr, 0.7
        ),
        "laplacian_responses (1024x1024)": lambda: kernels.laplacian_responses(img),
    }


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if not kernels.numba_available():
        raise SystemExit("numba is not importable; nothing to compare")

    rng = np.random.default_rng(0)
    cases = make_cases(rng)

    print(f"{'kernel':<42} {'numpy':>10} {'numba':>10} {'speedup':>9}")
    for name, fn in cases.items():
        kernels.set_backend("numba")
        fn()  # JIT warmup
        t_numba = _time(fn, args.repeats)
        kernels.set_backend("numpy")
        t_numpy = _time(fn, args.repeats)
        kernels.set_backend(None)
        print(
            f"{name:<42} {t_numpy * 1e3:>8.2f}ms {t_numba * 1e3:>8.2f}ms"
            f" {t_numpy / t_numba:>8.2f}x"
        )


if __name__ == "__main__":
    main()
