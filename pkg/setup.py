"""Build the compiled event kernel.

The extension is optional: if Cython or a C compiler is unavailable the
package installs without it and falls back to the pure-Python kernel.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("BBSIM_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        extensions = [
            Extension(
                "bbsim._ckernel",
                ["src/bbsim/_ckernel.pyx"],
                include_dirs=[np.get_include()],
                # bit-identical results with the Python kernel need strict IEEE
                extra_compile_args=["-O3", "-ffp-contract=off", "-fno-fast-math"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ]
        ext_modules = cythonize(
            extensions,
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
                "initializedcheck": False,
            },
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
