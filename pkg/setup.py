"""Build script. Compiles the Cython scan kernels when a toolchain is
available; otherwise installs pure Python (divseq falls back at import)."""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/divseq/_fastpath.pyx"],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
    for ext in ext_modules:
        ext.include_dirs.append(numpy.get_include())
except Exception as exc:  # noqa: BLE001 -- any build-chain failure degrades to pure python
    import sys

    print(f"divseq: skipping compiled extension ({exc!r}); "
          "pure-Python engine will be used", file=sys.stderr)
    ext_modules = []

setup(ext_modules=ext_modules)
