# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled pooling kernel; the NumPy fallback in _kernels_py mirrors it."""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def pool_crop(
    cnp.float64_t[:, :, ::1] grid,
    double x,
    double y,
    double w,
    double h,
    cnp.float64_t[::1] fallback,
):
    """Area-weighted mean of the grid cells under a box, L2-normalized."""
    cdef Py_ssize_t hh = grid.shape[0]
    cdef Py_ssize_t ww = grid.shape[1]
    cdef Py_ssize_t d = grid.shape[2]
    cdef Py_ssize_t i, j, k
    cdef double lo, hi, sx = 0.0, sy = 0.0, wsum, coef, norm = 0.0

    oy_arr = np.empty(hh, dtype=np.float64)
    ox_arr = np.empty(ww, dtype=np.float64)
    out_arr = np.zeros(d, dtype=np.float64)
    cdef cnp.float64_t[::1] oy = oy_arr
    cdef cnp.float64_t[::1] ox = ox_arr
    cdef cnp.float64_t[::1] out = out_arr

    for i in range(hh):
        lo = y if y > (<double>i) / hh else (<double>i) / hh
        hi = y + h if y + h < (<double>(i + 1)) / hh else (<double>(i + 1)) / hh
        oy[i] = hi - lo if hi - lo > 0.0 else 0.0
        sy += oy[i]
    for j in range(ww):
        lo = x if x > (<double>j) / ww else (<double>j) / ww
        hi = x + w if x + w < (<double>(j + 1)) / ww else (<double>(j + 1)) / ww
        ox[j] = hi - lo if hi - lo > 0.0 else 0.0
        sx += ox[j]

    wsum = sx * sy
    if wsum <= 0.0:
        return np.array(fallback, dtype=np.float64)

    for i in range(hh):
        if oy[i] == 0.0:
            continue
        for j in range(ww):
            if ox[j] == 0.0:
                continue
            coef = (oy[i] * ox[j]) / wsum
            for k in range(d):
                out[k] += coef * grid[i, j, k]

    for k in range(d):
        norm += out[k] * out[k]
    norm = sqrt(norm)
    if norm < 1e-30:
        return np.array(fallback, dtype=np.float64)
    for k in range(d):
        out[k] /= norm
    return out_arr
