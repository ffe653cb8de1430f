"""Small shared vector numerics: normalization, cosine similarity, stable softmax."""

from __future__ import annotations

import numpy as np

# Norms below this are treated as zero.
ZERO_NORM = 1e-30


class DegenerateVectorError(ValueError):
    """A zero-norm vector was supplied where a direction is required."""


def l2_normalize(v: np.ndarray, fallback: np.ndarray | None = None) -> np.ndarray:
    """Return v scaled to unit L2 norm.

    If v has (numerically) zero norm, return `fallback` when given, otherwise
    raise DegenerateVectorError.
    """
    v = np.asarray(v, dtype=np.float64)
    norm = float(np.sqrt(np.dot(v, v)))
    if norm < ZERO_NORM:
        if fallback is not None:
            return np.array(fallback, dtype=np.float64)
        raise DegenerateVectorError("cannot normalize a zero vector")
    return v / norm


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity of two equal-dimension vectors, clipped to [-1, 1]."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = float(np.sqrt(np.dot(u, u)))
    nv = float(np.sqrt(np.dot(v, v)))
    if nu < ZERO_NORM or nv < ZERO_NORM:
        raise DegenerateVectorError("cosine of a zero vector is undefined")
    return float(min(1.0, max(-1.0, float(np.dot(u, v)) / (nu * nv))))


def softmax(z: np.ndarray) -> np.ndarray:
    """Numerically stable softmax; output sums to 1."""
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max())
    return e / e.sum()


def quantize_f32(a: np.ndarray) -> np.ndarray:
    """Round to float32 precision, returned as float64.

    Bundle payloads are stored as little-endian float32; keeping in-memory
    values on the float32 lattice makes save/load round trips bit-exact.
    """
    return np.asarray(a, dtype=np.float64).astype(np.float32).astype(np.float64)
