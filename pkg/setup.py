"""Build script: compiles the optional Cython scan-loop extension.

The package works without the extension (a numpy fallback is selected at
import time); set SPRVM_NO_EXT=1 to skip compilation entirely.
"""

import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Builds the extension but never fails the install over it."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            print(f"warning: compiled extension skipped ({exc}); "
                  "sprvm will use the pure-python backend")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: building {ext.name} failed ({exc}); "
                  "sprvm will use the pure-python backend")


ext_modules = []
cmdclass = {}
if os.environ.get("SPRVM_NO_EXT", "") != "1":
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "sprvm._chains_cy",
                    ["src/sprvm/_chains_cy.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )
        cmdclass = {"build_ext": OptionalBuildExt}
    except ImportError as exc:
        print(f"warning: Cython/numpy unavailable at build time ({exc}); "
              "sprvm will use the pure-python backend")

setup(ext_modules=ext_modules, cmdclass=cmdclass)
