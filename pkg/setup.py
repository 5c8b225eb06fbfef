"""Build script for the optional compiled simulation kernel.

The package works without the extension (a pure-Python engine is selected at
import time); the extension is only a faster drop-in for the event loop.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover - source dist without cython
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext = Extension(
        "tandemfluid._kernels",
        ["src/tandemfluid/_kernels.pyx"],
        # -ffp-contract=off keeps float ops bit-identical to the pure-Python
        # engine (no FMA fusing), which the parity tests rely on.
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
    ext_modules = cythonize([ext], language_level=3)

setup(ext_modules=ext_modules)
