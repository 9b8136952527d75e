"""Builds the optional compiled trajectory kernel.

If Cython or a compiler is missing the package still installs and falls back
to the numpy kernel.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("DISSIPATIVE_ISING_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "dissipative_ising._kernels",
                    ["src/dissipative_ising/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3", "-fcx-limited-range"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
