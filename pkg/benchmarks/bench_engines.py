"""Benchmark the compiled crossing scanners against the pure numpy path.

Run with:  python3 benchmarks/bench_engines.py
"""

import time

import numpy as np

from divseq import _slowpath
from divseq._engine import BACKEND

try:
    from divseq import _fastpath
except ImportError:
    _fastpath = None


def _ks1_workload(horizon, scale, seed):
    rng = np.random.default_rng(seed)
    u = np.sort(rng.uniform(size=horizon))
    order = rng.permutation(horizon)
    u = u[order]
    t = np.arange(1, horizon + 1, dtype=float)
    gamma = scale / np.sqrt(t)
    return u, gamma


def _ks2_workload(per_stream, scale, seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(size=per_stream)
    y = rng.uniform(size=per_stream)
    steps = np.arange(1, 2 * per_stream + 1, dtype=float)
    gamma = scale / np.sqrt(np.maximum(steps // 2, 1.0))
    return x, y, gamma


def _time(fn, *args, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - start)
    return best, out


def main():
    print(f"active backend: {BACKEND}")
    if _fastpath is None:
        print("compiled extension unavailable; timing pure path only")

    rows = []
    for scale in (0.5, 1.0, 2.0):
        u, g1 = _ks1_workload(5000, scale, seed=11)
        slow, ref = _time(_slowpath.ks1_first_crossing, u, g1)
        if _fastpath is not None:
            fast, got = _time(_fastpath.ks1_first_crossing, u, g1)
            assert got == ref
        else:
            fast = float("nan")
        rows.append((f"ks1 T=5000 scale={scale}", slow, fast))

    for scale in (0.5, 1.0, 2.0):
        x, y, g2 = _ks2_workload(2000, scale, seed=23)
        slow, ref = _time(_slowpath.ks2_first_crossing, x, y, g2)
        if _fastpath is not None:
            fast, got = _time(_fastpath.ks2_first_crossing, x, y, g2)
            assert got == ref
        else:
            fast = float("nan")
        rows.append((f"ks2 2x2000  scale={scale}", slow, fast))

    header = f"{'workload':<24} {'python (ms)':>12} {'compiled (ms)':>14} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, slow, fast in rows:
        ratio = slow / fast if fast == fast and fast > 0 else float("nan")
        print(f"{name:<24} {slow * 1e3:>12.3f} {fast * 1e3:>14.3f} {ratio:>7.1f}x")


if __name__ == "__main__":
    main()
