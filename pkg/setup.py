"""Build the optional Cython kernels.

The package works without them; ``activestack.kernels`` falls back to the
pure-Python implementations when the extension is missing.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("ACTIVESTACK_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "activestack._ckernels",
                    ["src/activestack/_ckernels.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
                "initializedcheck": False,
            },
        )

setup(ext_modules=ext_modules)
