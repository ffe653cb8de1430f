import os

import numpy
from setuptools import Extension, setup

# LAGO_SKIP_EXT=1 installs the pure-NumPy build (kernels.py falls back at import).
ext_modules = []
if os.environ.get("LAGO_SKIP_EXT") != "1":
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "lago._kernels",
                ["src/lago/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                # -ffp-contract=off: keep mul+add rounding identical to the
                # NumPy fallback (no FMA fusion).
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
