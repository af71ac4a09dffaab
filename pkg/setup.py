"""Build script for the compiled oscillatory-sum core.

The extension is optional at runtime: hmflab falls back to a pure-numpy
implementation when the compiled module is absent (see hmflab._accel).
"""

import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "hmflab._filon",
        sources=["src/hmflab/_filon.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3", "-fcx-limited-range"],
    )
]

setup(ext_modules=cythonize(extensions, language_level="3"))
