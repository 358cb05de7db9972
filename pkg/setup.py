"""Build script for the optional compiled kernels.

The package is fully functional without the extension (a pure-numpy
implementation of the same kernels is selected at import time); the
extension exists because single-solve latency is the whole point of the
library.  Set REFSAFE_PURE_PYTHON=1 to skip compilation.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("REFSAFE_PURE_PYTHON") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "refsafe._speedups",
                    ["src/refsafe/_speedups.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
