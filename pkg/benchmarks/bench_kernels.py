"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each row is the median wall time of one call on full-size inputs
(25x25 grid, 4802-256-4 network).
"""

import argparse
import statistics
import time

import numpy as np

from activemap import _kernels_py
from activemap.belief import L_MAX, sensor_log_ratio
from activemap.env import MOORE, MOVES_4
from activemap.neural import init_params

try:
    from activemap import _kernels as _kernels_cy
except ImportError:
    _kernels_cy = None


def cases(k):
    rng = np.random.default_rng(0)
    n = 25
    lo = rng.uniform(-4, 4, (n, n))
    sense = np.array(MOORE, dtype=np.int64)
    moves = np.array(MOVES_4, dtype=np.int64)
    rows = rng.integers(0, n, 8).astype(np.int64)
    cols = rng.integers(0, n, 8).astype(np.int64)
    z = rng.integers(0, 2, 8).astype(np.int8)
    step = sensor_log_ratio(0.8)
    feats = np.empty((2, 2 * n - 1, 2 * n - 1))
    passable = (rng.random((n, n)) < 0.9).astype(np.uint8)
    targets = np.zeros((n, n), np.uint8)
    targets[n - 1, n - 1] = 1
    passable[n - 1, n - 1] = 1
    size = init_params(rng, n).flat.size
    params, m, v = rng.normal(size=size), np.zeros(size), np.zeros(size)
    grads = rng.normal(size=size)
    return {
        "apply_readings (8 cells)": lambda: k.apply_readings(lo, rows, cols, z, step, L_MAX),
        "myopic_scores": lambda: k.myopic_scores(lo, 12, 12, sense, moves, 0.8, False),
        "centered_features": lambda: k.centered_features(lo, 12, 12, feats),
        "bfs_plan (corner to corner)": lambda: k.bfs_plan(passable, targets, 0, 0, moves),
        f"adam_update ({size} params)": lambda: k.adam_update(
            params, m, v, grads, 1e-4, 0.9, 0.999, 1e-8, 1),
    }


def timeit(fn, repeat):
    fn()
    samples = []
    for _ in range(repeat):
        loops, t0 = 0, time.perf_counter()
        while True:
            fn()
            loops += 1
            elapsed = time.perf_counter() - t0
            if elapsed > 0.2:
                break
        samples.append(elapsed / loops)
    return statistics.median(samples)


def fmt(seconds):
    for unit, scale in (("s", 1), ("ms", 1e-3), ("us", 1e-6)):
        if seconds >= scale:
            return f"{seconds / scale:8.2f} {unit}"
    return f"{seconds * 1e9:8.1f} ns"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    py_cases = cases(_kernels_py)
    cy_cases = cases(_kernels_cy) if _kernels_cy else {}
    print(f"{'kernel':34s} {'python':>11s} {'cython':>11s} {'speedup':>8s}")
    for name, fn in py_cases.items():
        t_py = timeit(fn, args.repeat)
        if name in cy_cases:
            t_cy = timeit(cy_cases[name], args.repeat)
            print(f"{name:34s} {fmt(t_py)} {fmt(t_cy)} {t_py / t_cy:7.1f}x")
        else:
            print(f"{name:34s} {fmt(t_py)} {'(not built)':>11s}")


if __name__ == "__main__":
    main()
