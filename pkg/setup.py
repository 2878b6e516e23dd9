"""Build script: compiles the optional accelerator extension.

The package is pure Python plus one optional Cython extension housing the
hot numerical kernels (cyclic Jacobi rotations and the Euler-Maruyama
stepper).  If Cython or a C compiler is unavailable the extension is simply
skipped and the package falls back to the numpy implementations in
``irelab._kernels.fallback`` at import time.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "irelab._kernels._core",
                sources=["src/irelab/_kernels/_core.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError as exc:  # pragma: no cover - exercised only without Cython
    print(f"building without compiled kernels ({exc}); numpy fallback will be used")

setup(ext_modules=ext_modules)
