"""Build script for the optional compiled kernel.

If Cython or a C compiler is unavailable the install still succeeds and
the package falls back to the pure-Python kernels at import time.
"""

from setuptools import setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/vsoftpro/_kernels/_core.pyx"],
        compiler_directives={"language_level": 3},
    )
except Exception as exc:  # pragma: no cover
    import warnings

    warnings.warn(f"compiled kernel disabled ({exc}); using pure-Python fallback")
    ext_modules = []

setup(ext_modules=ext_modules)
