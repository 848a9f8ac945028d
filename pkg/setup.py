"""Builds the optional compiled recurrent kernel.

The package is fully functional without it: the autodiff kernels fall back
to the pure-numpy implementation when the extension is missing (see
sensorcond/autodiff/kernels/__init__.py). Build failures are therefore
non-fatal.
"""

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "sensorcond.autodiff.kernels._recurrent_cy",
                ["src/sensorcond/autodiff/kernels/_recurrent_cy.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
