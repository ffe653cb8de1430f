"""Timing comparison of the compiled pooling kernel against the NumPy fallback.

Usage: python benchmarks/bench_kernels.py [--boxes 2000]
"""

import argparse
import time

import numpy as np

from lago import _kernels_py
from lago.geometry import BoundingBox, clamp_to_image

try:
    from lago import _kernels
except ImportError:
    _kernels = None


def make_grid(rng, h, w, d):
    g = rng.standard_normal((h, w, d))
    g /= np.linalg.norm(g, axis=2, keepdims=True)
    return np.ascontiguousarray(g)


def make_boxes(rng, n):
    boxes = []
    for _ in range(n):
        x, y = rng.uniform(0, 0.9, 2)
        boxes.append(
            clamp_to_image(
                BoundingBox(float(x), float(y), float(rng.uniform(0.05, 1.0)), float(rng.uniform(0.05, 1.0)))
            )
        )
    return boxes


def run(pool, grid, boxes, fallback):
    t0 = time.perf_counter()
    acc = 0.0
    for b in boxes:
        acc += pool(grid, b.x, b.y, b.w, b.h, fallback)[0]
    return time.perf_counter() - t0, acc


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--boxes", type=int, default=2000)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    boxes = make_boxes(rng, args.boxes)
    print(f"{args.boxes} pooled boxes per cell; times in ms")
    print(f"{'grid':>14} {'numpy':>10} {'cython':>10} {'speedup':>9}")
    for h, w, d in [(8, 8, 16), (14, 14, 512), (24, 24, 768)]:
        grid = make_grid(rng, h, w, d)
        fallback = grid.mean(axis=(0, 1))
        fallback /= np.linalg.norm(fallback)
        t_py, acc_py = run(_kernels_py.pool_crop, grid, boxes, fallback)
        if _kernels is None:
            print(f"{h}x{w}x{d:>4} {1e3 * t_py:>10.1f} {'n/a':>10} {'n/a':>9}")
            continue
        t_cy, acc_cy = run(_kernels.pool_crop, grid, boxes, fallback)
        assert abs(acc_py - acc_cy) < 1e-6 * args.boxes
        print(f"{h:>2}x{w}x{d:>4} {1e3 * t_py:>10.1f} {1e3 * t_cy:>10.1f} {t_py / t_cy:>8.1f}x")
    if _kernels is None:
        print("compiled kernel not built; install without LAGO_SKIP_EXT to compare")


if __name__ == "__main__":
    main()
