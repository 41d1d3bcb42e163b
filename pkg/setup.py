"""Build script for the optional compiled derivative kernels.

The package is fully functional without the extension: ``dualdimer.diffnet``
falls back to the NumPy kernels when the compiled module is missing, so the
extension is marked optional and a failed compile does not fail the install.
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = [
    Extension(
        "dualdimer.diffnet._kernels",
        ["src/dualdimer/diffnet/_kernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]
for ext in extensions:
    ext.optional = True

setup(
    ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"})
    if cythonize is not None
    else [],
)
