"""Build script for the optional compiled kernels.

The package is fully functional without the extension (a NumPy fallback
is selected at import time); building it just makes the per-token
scoring and dependency-length loops faster.
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "wordorder._speedups",
                ["src/wordorder/_speedups.pyx"],
                include_dirs=[np.get_include()],
            )
        ],
        language_level="3",
    )

setup(ext_modules=ext_modules)
