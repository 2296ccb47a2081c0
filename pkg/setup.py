"""Builds the optional Cython kernel extension.

The package works without it (numpy fallback is selected at import time),
so a failed compile only costs speed. Build in place with:
    python setup.py build_ext --inplace
"""
import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

ext_modules = cythonize(
    [
        Extension(
            "bsamlab.kernels._speedups",
            ["src/bsamlab/kernels/_speedups.pyx"],
            include_dirs=[numpy.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
    ],
    language_level=3,
)

setup(ext_modules=ext_modules)
