"""Build script: compiles the optional transition-kernel extension.

The compiled kernel is a pure speedup; if Cython or a C compiler is
unavailable the install falls back to the pure-Python kernel at import
time. Set NETPEN_NO_EXT=1 to skip the extension build entirely.
"""

import os

from setuptools import setup
from setuptools.command.build_ext import build_ext
from setuptools.errors import CCompilerError, ExecError, PlatformError


class OptionalBuildExt(build_ext):
    """Build the extension if possible, warn and continue otherwise."""

    def run(self):
        try:
            super().run()
        except (CCompilerError, ExecError, PlatformError) as exc:
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except (CCompilerError, ExecError, PlatformError, ValueError) as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(f"WARNING: compiled kernel skipped ({exc}); using pure-Python fallback")


ext_modules = []
cmdclass = {}
if not os.environ.get("NETPEN_NO_EXT"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            ["src/netpen/_engine_cy.pyx"],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
        cmdclass["build_ext"] = OptionalBuildExt
    except ImportError:
        print("WARNING: Cython not available; using pure-Python kernel")

setup(ext_modules=ext_modules, cmdclass=cmdclass)
