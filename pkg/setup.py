"""Builds the optional compiled enumeration kernel.

Without Cython or a C compiler the package still installs and falls back to
the pure-Python kernel at import time.
"""
import numpy
from setuptools import setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        "src/ewfe/_kernels/_enum_c.pyx",
        compiler_directives={"language_level": "3"},
        quiet=True,
    )
    for ext in ext_modules:
        ext.include_dirs.append(numpy.get_include())

setup(ext_modules=ext_modules)
