"""Builds the optional compiled kernel core; the package works without it."""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("FRACP_LAB_PURE") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension("fracp_lab._kcore", ["src/fracp_lab/_kcore.pyx"],
                       include_dirs=[np.get_include()],
                       define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                       extra_compile_args=["-O3"])],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
