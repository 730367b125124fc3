import os

import numpy as np
from setuptools import Extension, setup

# OORO_NO_EXT=1 skips the compiled kernels; the package then runs on the numpy fallback.
ext_modules = []
if not os.environ.get("OORO_NO_EXT"):
    from Cython.Build import cythonize

    extensions = [
        Extension(
            "ooro._kernels",
            ["src/ooro/_kernels.pyx"],
            include_dirs=[np.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            # keep float evaluation order identical to the numpy fallback
            extra_compile_args=["-O3", "-ffp-contract=off"],
        )
    ]
    ext_modules = cythonize(
        extensions,
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )

setup(ext_modules=ext_modules)
