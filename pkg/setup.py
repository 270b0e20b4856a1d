"""Build script: compiles the optional C kernel extension.

The extension is a pure speedup; every kernel has a numpy fallback selected
at import time, so a failed build still yields a working package. Set
SOTVERSE_SKIP_EXT=1 to skip the extension entirely.
"""

import os
import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # missing compiler, etc.
            warnings.warn(f"skipping C kernels, using numpy fallback: {exc}")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"skipping {ext.name}, using numpy fallback: {exc}")


def extensions():
    if os.environ.get("SOTVERSE_SKIP_EXT"):
        return []
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError as exc:
        warnings.warn(f"Cython/numpy unavailable, skipping C kernels: {exc}")
        return []
    ext = Extension(
        "sotverse._ckernels",
        ["src/sotverse/_ckernels.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], quiet=True, language_level=3)


setup(ext_modules=extensions(), cmdclass={"build_ext": optional_build_ext})
