"""Build script for the optional compiled kernels.

Package metadata lives in ``pyproject.toml``.  The Cython extension is
marked optional: if it fails to build, the pure-Python kernels are used.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension
except ImportError:  # pragma: no cover - build without Cython
    pass
else:
    extensions = [
        Extension(
            "staircase_flow._kernels",
            ["src/staircase_flow/_kernels.pyx"],
            include_dirs=[np.get_include()],
            language="c++",
            extra_compile_args=["-O3"],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
    ]
    ext_modules = cythonize(extensions, compiler_directives={"language_level": "3"})
    for ext in ext_modules:
        ext.optional = True

setup(ext_modules=ext_modules)
