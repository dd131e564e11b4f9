"""Build script: compiles the optional fast kernel extension.

The package is fully functional without the extension (a pure-Python
mirror of the kernels is selected at import time), so a failed build of
the .pyx module is tolerated.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "argus._kernels",
                sources=["src/argus/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                # -ffp-contract=off keeps float results bit-identical with
                # the pure-Python mirror (no FMA contraction).
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
