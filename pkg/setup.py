"""Build script: compiles the Cython kernel when a toolchain is available.

The compiled kernel is an optimization, not a requirement -- the package
falls back to the pure-Python kernel at import time -- so any failure here
degrades the install instead of breaking it.  -ffp-contract=off keeps the
compiler from fusing multiply-adds, which would break the bit-identity
contract between the two kernels.
"""

import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as e:  # missing compiler, broken toolchain, ...
            print(f"warning: skipping compiled kernel ({e})", file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as e:
            print(f"warning: skipping {ext.name} ({e})", file=sys.stderr)


ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/mutclock/backend/_ckernel.pyx"],
        language_level=3,
    )
    for ext in ext_modules:
        ext.extra_compile_args = ["-O3", "-ffp-contract=off"]
except Exception as e:
    print(f"warning: Cython unavailable, pure-Python kernel only ({e})", file=sys.stderr)

setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})
