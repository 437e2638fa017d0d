"""Build script: compiles the optional fast kernels.

The package works without the extension (pure-Python kernels are selected at
import time); the build therefore tolerates a missing compiler or Cython.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "formsieve._kernels._fast",
                ["src/formsieve/_kernels/_fast.pyx"],
                extra_compile_args=["-O2"],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
