"""Time the compiled kernels against the pure-Python twins.

    python3 benchmarks/bench_kernels.py [--n 200000] [--repeat 3]

Both backends receive identical pre-drawn inputs; outputs are checked for
equality before timings are reported.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from microlab import _kernels_py as py
from microlab.rng import stream

try:
    from microlab import _kernels as cy
except ImportError:  # extension not built
    cy = None


def _inputs(n: int, seed: int = 0):
    g = stream(seed, 99)
    K = 10
    m = n + K
    sizes = np.ceil((1 - g.random(m)) ** (-1 / 1.5)).astype(np.int64)
    signs = np.where(g.random(m) < 0.5, 1, -1).astype(np.int8)
    picks = g.integers(0, K, n, dtype=np.int64)
    eps = np.where(g.random(n) < 0.5, 1, -1).astype(np.int8)
    days = max(n // 200, 1)
    return {
        "lmf_fixed": (picks, sizes, signs, K),
        "lmf_general": (g.random(n), g.random(n), sizes, signs, K, 0.2),
        "markov_signs": (g.random(n), 0.3, 1),
        "linear_signs": (g.random(n), np.array([0.3, 0.2, 0.1]), np.array([1, -1, 1], dtype=np.int8)),
        "gm_paths": (g.random((days, 200)), g.random((days, 200)),
                     np.where(g.random(days) < 0.5, 1, -1).astype(np.int8), 0.05, 0.5),
        "mm_inventory": (eps, np.ones(n), 0.1, 0.1, 0.0),
    }


def _same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def _best(fn, args, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t)
    return best


def main(argv=None) -> list[dict]:
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    a = ap.parse_args(argv)
    rows = []
    print(f"{'kernel':<14}{'python s':>12}{'cython s':>12}{'speedup':>10}  equal")
    for name, args in _inputs(a.n).items():
        tp = _best(getattr(py, name), args, a.repeat)
        if cy is None:
            rows.append({"kernel": name, "python": tp, "cython": None, "speedup": None, "equal": None})
            print(f"{name:<14}{tp:>12.4f}{'n/a':>12}{'n/a':>10}  n/a")
            continue
        eq = _same(getattr(py, name)(*args), getattr(cy, name)(*args))
        tc = _best(getattr(cy, name), args, a.repeat)
        rows.append({"kernel": name, "python": tp, "cython": tc, "speedup": tp / tc, "equal": eq})
        print(f"{name:<14}{tp:>12.4f}{tc:>12.4f}{tp / tc:>10.1f}  {eq}")
    return rows


if __name__ == "__main__":
    main()
