import sys

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [Extension("tiersim._kernel", ["src/tiersim/_kernel.pyx"])],
        language_level=3,
    )
else:
    print("Cython not available; building without the compiled kernel", file=sys.stderr)

setup(ext_modules=ext_modules)
