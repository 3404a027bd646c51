"""Build hook for the optional compiled kernel extension.

The package is fully functional without the extension (the pure-Python
kernels in ``minnet._kernels.pure`` are selected at import when the
extension is absent), so any build failure here degrades to a pure install
instead of aborting. Set MINNET_NO_EXTENSION=1 to skip the build outright.
"""

import os

from setuptools import setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, broken toolchain, ...
            print(f"warning: compiled kernels skipped ({exc}); using pure-Python fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: {ext.name} skipped ({exc}); using pure-Python fallback")


ext_modules = []
if os.environ.get("MINNET_NO_EXTENSION") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            ["src/minnet/_kernels/_core.pyx"],
            language_level=3,
        )
    except ImportError:
        print("warning: Cython not available; building without compiled kernels")

setup(ext_modules=ext_modules, cmdclass={"build_ext": optional_build_ext})
