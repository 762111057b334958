"""Build script with an optional compiled time-stepping kernel.

The Cython extension is a pure speedup; the package works without it
(pipeflex.backend falls back to the numpy kernel at import time), so a
missing compiler or Cython must never fail the install.
"""

import os
import sys

from setuptools import setup


def maybe_extensions():
    try:
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        print("pipeflex: Cython not available, installing without the "
              "compiled kernel", file=sys.stderr)
        return []
    if not os.path.exists("src/pipeflex/_newmark.pyx"):
        return []
    ext = Extension("pipeflex._newmark", ["src/pipeflex/_newmark.pyx"])
    return cythonize(
        [ext],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )


if __name__ == "__main__":
    try:
        setup(ext_modules=maybe_extensions())
    except SystemExit:
        raise
    except Exception as exc:  # compiler missing, broken toolchain, ...
        print("pipeflex: compiled kernel build failed (%s); retrying "
              "without it" % exc, file=sys.stderr)
        setup(ext_modules=[])
