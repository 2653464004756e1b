"""Build script for the optional compiled kernels.

The extension is marked optional: if a compiler or Cython is missing the
package still installs and falls back to the numpy implementations.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "fracpde._kernels",
                ["src/fracpde/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )
except ImportError:  # pragma: no cover - build without Cython
    ext_modules = []

setup(ext_modules=ext_modules)
