"""Build script: compiles the optional Cython jet kernel.

The package is fully functional without the extension; `heisgeom._kernel`
falls back to the pure-NumPy implementation when the compiled module is
missing, so any build failure here is demoted to a warning.
"""

import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            warnings.warn(f"skipping compiled jet kernel: {exc}")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"skipping {ext.name}: {exc}")


ext_modules = []
cmdclass = {}
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "heisgeom._jetcore_cy",
                ["src/heisgeom/_jetcore_cy.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
    cmdclass["build_ext"] = optional_build_ext
except ImportError:
    pass

setup(ext_modules=ext_modules, cmdclass=cmdclass)
