"""Builds the optional compiled kernel extension.

If Cython or a C compiler is unavailable the build falls back to a
pure-python install; sqzlab._kernels selects the numpy implementation
at import time in that case.
"""

import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

try:
    import numpy
    from Cython.Build import cythonize
except ImportError:
    cythonize = None


class optional_build_ext(build_ext):
    """Treat extension build failure as a warning, not an error."""

    def run(self):
        try:
            super().run()
        except Exception as exc:
            warnings.warn(f"compiled kernels skipped: {exc}")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"compiled kernels skipped ({ext.name}): {exc}")


if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "sqzlab._kernels._core",
                ["src/sqzlab/_kernels/_core.pyx"],
                include_dirs=[numpy.get_include()],
            )
        ],
        language_level="3",
    )
else:
    extensions = []

setup(ext_modules=extensions, cmdclass={"build_ext": optional_build_ext})
