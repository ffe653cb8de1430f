import importlib

import numpy as np
import pytest

from lago import _kernels_py, kernels


def have_compiled() -> bool:
    try:
        importlib.import_module("lago._kernels")
        return True
    except ImportError:
        return False


def random_grid(rng, h, w, d):
    g = rng.standard_normal((h, w, d))
    return np.ascontiguousarray(g / np.linalg.norm(g, axis=2, keepdims=True))


def test_backend_is_reported():
    assert kernels.BACKEND in ("cython", "numpy")


def test_single_cell_grid_is_exact():
    rng = np.random.default_rng(0)
    grid = random_grid(rng, 1, 1, 8)
    fallback = np.zeros(8)
    out = _kernels_py.pool_crop(grid, 0.2, 0.3, 0.4, 0.3, fallback)
    expected = grid[0, 0] / np.linalg.norm(grid[0, 0])
    assert np.array_equal(out, expected)


def test_exact_one_cell_of_four(two_by_two=None):
    grid = np.zeros((2, 2, 4))
    for idx, (i, j) in enumerate([(0, 0), (0, 1), (1, 0), (1, 1)]):
        grid[i, j, idx] = 2.0
    out = _kernels_py.pool_crop(grid, 0.0, 0.0, 0.5, 0.5, np.zeros(4))
    assert np.array_equal(out, np.array([1.0, 0, 0, 0]))


def test_fallback_on_zero_mean():
    grid = np.zeros((2, 2, 3))
    fallback = np.array([0.0, 1.0, 0.0])
    out = _kernels_py.pool_crop(grid, 0.1, 0.1, 0.5, 0.5, fallback)
    assert np.array_equal(out, fallback)
    out[0] = 5.0  # returned vector must be a copy
    assert fallback[0] == 0.0


@pytest.mark.skipif(not have_compiled(), reason="compiled kernel not built")
def test_backend_parity():
    from lago import _kernels

    rng = np.random.default_rng(42)
    grid = random_grid(rng, 7, 5, 16)
    fallback = grid.mean(axis=(0, 1))
    fallback = fallback / np.linalg.norm(fallback)
    for _ in range(200):
        x, y = rng.uniform(0, 0.9, 2)
        w = min(float(rng.uniform(0.05, 1.0)), 1.0 - x)
        h = min(float(rng.uniform(0.05, 1.0)), 1.0 - y)
        a = _kernels.pool_crop(grid, x, y, w, h, fallback)
        b = _kernels_py.pool_crop(grid, x, y, w, h, fallback)
        assert np.abs(a - b).max() < 1e-12
        assert abs(np.linalg.norm(a) - 1.0) < 1e-12
