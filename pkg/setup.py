"""Build the optional compiled sweep kernels.

The package works without them: ``privgibbs.kernels`` falls back to the
pure-Python implementation when the extension cannot be imported.
"""
import os

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("PRIVGIBBS_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "privgibbs._kernels",
                ["src/privgibbs/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
