"""Build script: compiles the optional C kernel extension.

The package is fully functional without the extension (a NumPy
reference backend is selected at import time), so compilation
failures are deliberately non-fatal.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/recontact_adjust/glm/kernels/_ckernels.pyx"],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )
except Exception as exc:  # pragma: no cover - build-time only
    import sys

    print(f"C kernel build skipped: {exc}", file=sys.stderr)

setup(ext_modules=ext_modules)
