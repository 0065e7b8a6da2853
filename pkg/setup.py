"""Builds the compiled leapfrog kernel; the package runs without it."""
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install, numpy kernel is used
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("blowup_lab._kernels", ["src/blowup_lab/_kernels.pyx"],
                   extra_compile_args=["-O3"])],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
