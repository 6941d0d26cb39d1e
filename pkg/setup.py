"""Build the optional Cython kernels.

The extension is optional: if Cython or a C compiler is missing the package
installs without it and ``slicebench.kernels`` falls back to pure Python.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("SLICEBENCH_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "slicebench._ckernels",
                    ["src/slicebench/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    # no FMA contraction: results must match the Python fallback bit for bit
                    extra_compile_args=["-O2", "-ffp-contract=off"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    optional=True,
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
