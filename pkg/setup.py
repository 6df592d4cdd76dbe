import os
import warnings

from setuptools import setup

ext_modules = []
if os.environ.get("PROJLSTD_NO_EXT", "").strip() in ("", "0"):
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "projlstd.kernels._fast",
                    ["src/projlstd/kernels/_fast.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    # no -ffast-math / -march=native: keep IEEE op order so the
                    # compiled and fallback kernels agree
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        warnings.warn("Cython/numpy unavailable; installing the pure-Python kernels only.")

setup(ext_modules=ext_modules)
