"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a numpy fallback is selected at
import time), so a failed compile only disables the fast path.
"""

import sys

from setuptools import Extension, setup


def extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    exts = [
        Extension(
            "perpsim.kernels._speedups",
            ["src/perpsim/kernels/_speedups.pyx"],
            include_dirs=[numpy.get_include()],
            extra_compile_args=["-O3"],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
    ]
    return cythonize(
        exts,
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )


try:
    setup(ext_modules=extensions())
except SystemExit:
    # Retry as pure python so a missing compiler does not block installation.
    sys.stderr.write("perpsim: extension build failed, installing pure-python\n")
    setup(ext_modules=[])
