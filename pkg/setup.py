"""Build script: compiles the optional fast-kernel extension.

The package works without the extension (pure numpy fallback); the build
therefore tolerates a missing/failing Cython toolchain instead of dying.
"""

import numpy as np
from setuptools import setup, Extension

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext = Extension(
        "marllab.diffmath._kernels_cy",
        sources=["src/marllab/diffmath/_kernels_cy.pyx"],
        include_dirs=[np.get_include()],
        # -ffp-contract=off: forbid fused multiply-add so results are
        # bit-identical to the numpy fallback.
        extra_compile_args=["-O3", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    ext_modules = cythonize([ext], language_level="3")

setup(ext_modules=ext_modules)
