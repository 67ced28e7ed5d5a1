"""Build hook for the optional compiled search kernels.

The package is fully functional without the extension; planners fall back
to the pure-Python engines when the build is unavailable.
"""

import os

from setuptools import Extension, setup

SOURCE = "src/horizonplan/_speedups.pyx"

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    if os.path.exists(SOURCE):
        ext_modules = cythonize(
            [
                Extension(
                    "horizonplan._speedups",
                    [SOURCE],
                    language="c++",
                    # no fp contraction: compiled results must be bit-identical
                    # to the pure-Python engines
                    extra_compile_args=["-O2", "-std=c++17", "-ffp-contract=off"],
                )
            ],
            language_level=3,
        )
    else:
        ext_modules = []

setup(ext_modules=ext_modules)
