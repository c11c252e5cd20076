"""Build script: compiles the optional evaluation core.

The package is fully functional without the extension (a NumPy fallback is
selected at import time); the compiled core is only a speedup for the
per-event kernel sums.  Set STKDE_NO_EXT=1 to skip compilation entirely.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("STKDE_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize

        ext = Extension(
            "stkde._evalcore",
            ["src/stkde/_evalcore.pyx"],
            include_dirs=[np.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            optional=True,
        )
        ext_modules = cythonize([ext], language_level="3")
    except ImportError:
        pass

setup(ext_modules=ext_modules)
