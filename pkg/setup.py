"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a pure-Python twin of every
kernel ships in ``sdiqrng._kernels._ref``); set SDIQRNG_NO_EXT=1 to skip
compilation entirely.  ``-ffp-contract=off`` keeps the compiled kernels
bit-identical to the pure-Python ones (no fused multiply-adds).
"""

import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the extension if possible, fall back to pure Python otherwise."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            print(f"warning: kernel extension build failed ({exc}); "
                  "using pure-Python kernels")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: building {ext.name} failed ({exc}); "
                  "using pure-Python kernels")


extensions = []
if not os.environ.get("SDIQRNG_NO_EXT"):
    try:
        from Cython.Build import cythonize

        extensions = cythonize(
            [
                Extension(
                    "sdiqrng._kernels._core",
                    ["src/sdiqrng/_kernels/_core.pyx"],
                    extra_compile_args=["-O2", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        print("warning: Cython not available; using pure-Python kernels")

setup(ext_modules=extensions, cmdclass={"build_ext": optional_build_ext})
