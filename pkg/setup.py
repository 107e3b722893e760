"""Build script. The compiled quadrature kernel is optional: if Cython or a
C compiler is unavailable the package falls back to the NumPy implementation
selected at import time in treewave._kernels."""

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "treewave._kernels._cellsum",
                ["src/treewave/_kernels/_cellsum.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover
    print(f"treewave: skipping compiled kernel ({exc}); NumPy fallback will be used")

setup(ext_modules=ext_modules)
