import os

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # the package falls back to numpy kernels
    cythonize = None

# The likelihood loops rely on -ffast-math so GCC can call glibc's vector
# exp/log1p. It is passed at compile time only: linking with it would pull
# in crtfastmath.o and flip flush-to-zero for the whole process.
native = os.environ.get("NSPOT_NATIVE", "1") not in ("0", "")
simd_flags = ["-O3", "-ffast-math", "-fopenmp-simd"] + (["-march=native"] if native else [])

extensions = [
    Extension(
        "nspot.kernels._loglik",
        ["src/nspot/kernels/_loglik.pyx"],
        include_dirs=["src/nspot/kernels", numpy.get_include()],
        extra_compile_args=simd_flags,
        extra_link_args=["-lmvec"],
        optional=True,
    ),
    Extension(
        "nspot.kernels._simulate",
        ["src/nspot/kernels/_simulate.pyx"],
        extra_compile_args=["-O3"],
        optional=True,
    ),
]

setup(ext_modules=cythonize(extensions, language_level=3) if cythonize else [])
