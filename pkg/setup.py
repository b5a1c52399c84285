"""Builds the optional compiled stencil kernels.

Set SLGFLOW_PURE=1 to skip the extension; the package falls back to the
numpy kernels at import time.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("SLGFLOW_PURE") != "1":
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "slgflow._kernels_cy",
                    ["src/slgflow/_kernels_cy.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
