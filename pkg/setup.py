"""Build script: compiles the optional C selection kernel when Cython is available.

The package works without the extension (a NumPy fallback is selected at
import time), so the build degrades gracefully on machines without Cython
or a C compiler. Set PATSIM_NO_EXT=1 to force the pure-Python build.

    python setup.py build_ext --inplace   # compile the kernel in a checkout
"""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("PATSIM_NO_EXT"):
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "patsim._kernels._native",
                    ["src/patsim/_kernels/_native.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={
                "language_level": 3,
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
    except ImportError:
        pass

setup(ext_modules=ext_modules)
