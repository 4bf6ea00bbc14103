import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

openmp = os.environ.get("KAE_NO_OPENMP", "") == ""

extensions = [
    Extension(
        "kae._core",
        ["src/kae/_core.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"] + (["-fopenmp"] if openmp else []),
        extra_link_args=["-fopenmp"] if openmp else [],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        # the pure-numpy fallback covers a failed compile
        optional=True,
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3", "boundscheck": False, "wraparound": False},
    )
)
