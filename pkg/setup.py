"""Builds the optional compiled kernel extension.

The package works without it (a pure-Python fallback is selected at
import time), so a missing compiler or Cython only costs speed.
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "kndn._kernels",
                ["src/kndn/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
