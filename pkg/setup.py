import os
import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the Cython kernels when possible; the package falls back to numpy otherwise."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            warnings.warn(f"optdesign: compiled kernels not built ({exc}); using pure-Python fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"optdesign: failed to build {ext.name} ({exc}); using pure-Python fallback")


ext_modules = []
if not os.environ.get("OPTDESIGN_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        warnings.warn("Cython not available; skipping compiled kernels")
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "optdesign._kernels",
                    ["src/optdesign/_kernels.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})
