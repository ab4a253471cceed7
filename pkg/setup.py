"""Build script: compiles the hot-loop kernel extension when Cython and a C
toolchain are available, otherwise installs the pure-Python fallback only."""

import os
from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    import numpy as np

    from setuptools import Extension

    ext = Extension(
        "sstlab._core",
        ["src/sstlab/_core.pyx"],
        include_dirs=[np.get_include()],
        library_dirs=[os.path.join(np.get_include(), "..", "..", "random", "lib")],
        libraries=["npyrandom"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    ext_modules = cythonize([ext], language_level=3)
except ImportError:
    pass

setup(ext_modules=ext_modules)
