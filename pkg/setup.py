"""Build hook for the optional compiled core.

The package works without it: if Cython or a C compiler is missing the
extension is skipped and ``fbmsteer._pycore`` is used instead.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("FBMSTEER_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "fbmsteer._ccore",
                    ["src/fbmsteer/_ccore.pyx"],
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
