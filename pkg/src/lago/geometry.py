"""Axis-aligned box arithmetic on normalized image coordinates.

All boxes are fractions of the image plane: (x, y) is the top-left corner,
(w, h) the side lengths, everything in [0, 1] after clamping.
"""

from __future__ import annotations

from dataclasses import dataclass


class InvalidBoxError(ValueError):
    """Box with non-positive width or height."""


@dataclass(frozen=True)
class BoundingBox:
    x: float
    y: float
    w: float
    h: float

    def area(self) -> float:
        return self.w * self.h

    def center(self) -> tuple[float, float]:
        return self.x + 0.5 * self.w, self.y + 0.5 * self.h

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)


FULL_IMAGE = BoundingBox(0.0, 0.0, 1.0, 1.0)


def clamp_to_image(b: BoundingBox) -> BoundingBox:
    """Clamp a box into the unit square.

    Oversized sides are capped at 1 first, then the box is translated back
    inside; shape is preserved whenever the box fits.
    """
    if b.w <= 0.0 or b.h <= 0.0:
        raise InvalidBoxError(f"box sides must be positive, got w={b.w}, h={b.h}")
    w = min(b.w, 1.0)
    h = min(b.h, 1.0)
    x = max(0.0, min(b.x, 1.0 - w))
    y = max(0.0, min(b.y, 1.0 - h))
    return BoundingBox(x, y, w, h)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union; 1 iff identical, 0 iff disjoint."""
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    union = a.area() + b.area() - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def generate_neighbors(b: BoundingBox, delta: float, rho: float) -> list[BoundingBox]:
    """Eight clamped moves around b: +-x / +-y shifts and center-fixed w/h rescales.

    Shifts are box-relative (dx = delta*w, dy = delta*h).  Clamped duplicates
    and moves that land back on b are dropped; order is deterministic
    (+x, -x, +y, -y, +w, -w, +h, -h).
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must be in (0, 1)")
    dx = delta * b.w
    dy = delta * b.h
    wu, wd = b.w * (1.0 + rho), b.w * (1.0 - rho)
    hu, hd = b.h * (1.0 + rho), b.h * (1.0 - rho)
    moves = [
        BoundingBox(b.x + dx, b.y, b.w, b.h),
        BoundingBox(b.x - dx, b.y, b.w, b.h),
        BoundingBox(b.x, b.y + dy, b.w, b.h),
        BoundingBox(b.x, b.y - dy, b.w, b.h),
        BoundingBox(b.x + (b.w - wu) / 2.0, b.y, wu, b.h),
        BoundingBox(b.x + (b.w - wd) / 2.0, b.y, wd, b.h),
        BoundingBox(b.x, b.y + (b.h - hu) / 2.0, b.w, hu),
        BoundingBox(b.x, b.y + (b.h - hd) / 2.0, b.w, hd),
    ]
    out: list[BoundingBox] = []
    seen = {b.as_tuple()}
    for m in moves:
        c = clamp_to_image(m)
        key = c.as_tuple()
        if key in seen:
            continue
        seen.add(key)
        out.append(c)
    return out


def diverse_top_k_indices(
    boxes: list[BoundingBox],
    scores: list[float],
    k: int,
    tau_search: float,
) -> list[int]:
    """Greedy score-descending selection under a pairwise IoU < tau constraint.

    Ties are broken by earlier list position; stops at k or exhaustion.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0.0 < tau_search <= 1.0:
        raise ValueError("tau_search must be in (0, 1]")
    order = sorted(range(len(boxes)), key=lambda i: scores[i], reverse=True)
    kept: list[int] = []
    for i in order:
        if all(iou(boxes[i], boxes[j]) < tau_search for j in kept):
            kept.append(i)
            if len(kept) == k:
                break
    return kept


def diverse_top_k(
    candidates: list[tuple[BoundingBox, float]],
    k: int,
    tau_search: float,
) -> list[tuple[BoundingBox, float]]:
    """diverse_top_k_indices over (box, score) pairs."""
    boxes = [b for b, _ in candidates]
    scores = [s for _, s in candidates]
    return [candidates[i] for i in diverse_top_k_indices(boxes, scores, k, tau_search)]
