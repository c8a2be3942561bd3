"""Build script for the optional compiled selection core.

The package works without the extension (a NumPy fallback is selected at
import time); the extension just speeds up the greedy max-variance inner
loop.  Set NSKB_SKIP_EXT=1 to install pure-Python only.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("NSKB_SKIP_EXT"):
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            "src/nskb/_core.pyx",
            compiler_directives={
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
                "language_level": 3,
            },
        )
        for ext in ext_modules:
            ext.include_dirs.append(numpy.get_include())
            ext.extra_compile_args.append("-O3")
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
