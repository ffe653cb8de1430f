"""Mask-based object proposals: Otsu foreground threshold, connected
components, component bounding boxes ranked by mask area."""

from __future__ import annotations

import numpy as np
from PIL import Image
from scipy import ndimage


def otsu_threshold(gray: np.ndarray) -> float:
    """Classic between-class-variance maximizer on a 256-bin histogram."""
    hist, edges = np.histogram(gray, bins=256, range=(0.0, 1.0))
    total = gray.size
    centers = (edges[:-1] + edges[1:]) / 2
    weight_bg = np.cumsum(hist)
    weight_fg = total - weight_bg
    cum_sum = np.cumsum(hist * centers)
    mean_bg = np.divide(cum_sum, weight_bg, out=np.zeros(256), where=weight_bg > 0)
    mean_fg = np.divide(cum_sum[-1] - cum_sum, weight_fg, out=np.zeros(256), where=weight_fg > 0)
    variance = weight_bg * weight_fg * (mean_bg - mean_fg) ** 2
    # background is everything at or below the chosen bin, so report its upper edge
    return float(edges[int(np.argmax(variance)) + 1])


def mask_proposals(image: Image.Image, max_proposals: int = 8) -> np.ndarray:
    """Top-N component bounding boxes as normalized (x, y, w, h) rows.

    The minority side of the Otsu split is treated as foreground; the full
    image is the fallback when no component survives.
    """
    gray = np.asarray(image.convert("L"), dtype=np.float64) / 255.0
    hh, ww = gray.shape
    thr = otsu_threshold(gray)
    fg = gray > thr
    if fg.mean() > 0.5:
        fg = ~fg
    labels, count = ndimage.label(fg)
    rows = []
    if count:
        areas = ndimage.sum_labels(np.ones_like(gray), labels, index=np.arange(1, count + 1))
        slices = ndimage.find_objects(labels)
        order = np.argsort(areas)[::-1][:max_proposals]
        for idx in order:
            sl_y, sl_x = slices[idx]
            x = sl_x.start / ww
            y = sl_y.start / hh
            w = (sl_x.stop - sl_x.start) / ww
            h = (sl_y.stop - sl_y.start) / hh
            rows.append(_clamp(x, y, w, h))
    if not rows:
        rows.append((0.0, 0.0, 1.0, 1.0))
    return np.array(rows, dtype=np.float64)


def _clamp(x: float, y: float, w: float, h: float) -> tuple[float, float, float, float]:
    w = min(max(w, 1e-6), 1.0)
    h = min(max(h, 1e-6), 1.0)
    x = max(0.0, min(x, 1.0 - w))
    y = max(0.0, min(y, 1.0 - h))
    return (x, y, w, h)
