"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a numpy fallback is selected at
import time), so any failure here degrades to a pure-Python install instead
of aborting.
"""

import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """build_ext that downgrades compiler failures to a warning."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001 - any build failure is non-fatal
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(
            "warning: building the damlab._kernels_cy extension failed "
            f"({exc!r}); falling back to the pure-Python kernels",
            file=sys.stderr,
        )


def _extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError as exc:
        print(
            f"warning: Cython/numpy unavailable at build time ({exc}); "
            "installing without the compiled kernels",
            file=sys.stderr,
        )
        return []
    ext = Extension(
        "damlab._kernels_cy",
        ["src/damlab/_kernels_cy.pyx"],
        include_dirs=[np.get_include()],
        # -fcx-limited-range keeps complex multiplies inline instead of the
        # checked __muldc3 library call; inputs here are always finite and
        # well scaled, so the NaN-recovery path is dead weight.
        extra_compile_args=["-O3", "-fcx-limited-range"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=_extensions(), cmdclass={"build_ext": OptionalBuildExt})
