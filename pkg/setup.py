import warnings

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "irrisched.soilsim._kernel_cy",
                ["src/irrisched/soilsim/_kernel_cy.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )
except ImportError:
    warnings.warn(
        "Cython not available; building without the compiled solver kernel "
        "(the pure-Python fallback will be used at runtime)."
    )
    extensions = []

setup(ext_modules=extensions)
