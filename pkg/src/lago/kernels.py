"""Selects the pooling kernel backend at import time.

The compiled Cython extension is preferred; the NumPy implementation is the
fallback.  Set LAGO_KERNELS=numpy (or =cython) to force a backend.  Backends
agree to ~1e-12 (summation order differs for multi-cell pools).
"""

from __future__ import annotations

import os

_FORCE = os.environ.get("LAGO_KERNELS", "").strip().lower()
if _FORCE not in ("", "cython", "numpy"):
    raise ImportError(f"LAGO_KERNELS must be 'cython' or 'numpy', got {_FORCE!r}")

_impl = None
if _FORCE in ("", "cython"):
    try:
        from lago import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        if _FORCE == "cython":
            raise
        _impl = None
if _impl is None:
    from lago import _kernels_py as _impl

    BACKEND = "numpy"

pool_crop = _impl.pool_crop
