"""Pure-NumPy pooling kernel; fallback when the compiled extension is absent."""

from __future__ import annotations

import numpy as np


def cell_overlaps(lo: float, size: float, n: int) -> np.ndarray:
    """Overlap lengths of the interval [lo, lo+size] with n uniform cells of [0, 1]."""
    edges = np.arange(n + 1, dtype=np.float64) / n
    left = np.maximum(edges[:-1], lo)
    right = np.minimum(edges[1:], lo + size)
    return np.maximum(right - left, 0.0)


def pool_crop(
    grid: np.ndarray,
    x: float,
    y: float,
    w: float,
    h: float,
    fallback: np.ndarray,
) -> np.ndarray:
    """Area-weighted mean of the grid cells under a box, L2-normalized.

    grid is (H, W, d) float64; weights are fractional box/cell overlap areas.
    A degenerate (zero) pooled mean returns a copy of `fallback`.
    """
    oy = cell_overlaps(y, h, grid.shape[0])
    ox = cell_overlaps(x, w, grid.shape[1])
    # wsum as a product of the axis sums keeps the single-cell case exact:
    # coef = (oy*ox)/(ox_sum*oy_sum) == 1.0 when only one cell is covered.
    wsum = ox.sum() * oy.sum()
    iy = np.nonzero(oy)[0]
    ix = np.nonzero(ox)[0]
    if wsum <= 0.0 or iy.size == 0 or ix.size == 0:
        return np.array(fallback, dtype=np.float64)
    sl_y = slice(iy[0], iy[-1] + 1)
    sl_x = slice(ix[0], ix[-1] + 1)
    coef = np.multiply.outer(oy[sl_y], ox[sl_x]) / wsum
    acc = np.einsum("ij,ijk->k", coef, grid[sl_y, sl_x])
    norm = float(np.sqrt(np.dot(acc, acc)))
    if norm < 1e-30:
        return np.array(fallback, dtype=np.float64)
    return acc / norm
