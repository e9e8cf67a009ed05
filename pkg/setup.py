import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("PATHPARSE_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:  # pure-Python fallback only
        cythonize = None
    if cythonize is not None:
        extensions = [
            Extension(
                "pathparse._ckernels",
                ["src/pathparse/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                # bitwise agreement with the Python fallback needs no FMA contraction
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ]
        ext_modules = cythonize(
            extensions,
            compiler_directives={"language_level": "3", "boundscheck": False, "wraparound": False},
        )

setup(ext_modules=ext_modules)
