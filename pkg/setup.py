"""Build the optional compiled kernel; the package falls back to numpy without it."""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("SUBMAXSENS_NO_EXT"):
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "submaxsens._mvn_core",
                    ["src/submaxsens/_mvn_core.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
