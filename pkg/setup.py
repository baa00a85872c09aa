"""Build shim: compile the optional Gillespie extension, fall back to pure Python.

The package is fully functional without the extension (ahrkit._gillespie_py
implements the same loop); the compiled core exists for large Monte Carlo
ensembles.  Any build failure therefore downgrades to a warning.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "ahrkit._gillespie",
                ["src/ahrkit/_gillespie.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3", "-march=native"],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - toolchain-dependent
    sys.stderr.write(
        "ahrkit: compiled extension skipped (%s); using pure-Python backend\n" % exc
    )
    ext_modules = []

setup(ext_modules=ext_modules)
