import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

# The compiled core is optional: geokge.kernels falls back to the pure
# numpy implementation when the extension is absent.
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "geokge._ckernels",
                ["src/geokge/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                optional=True,
            )
        ],
        language_level=3,
    )
else:
    ext_modules = []

setup(ext_modules=ext_modules)
