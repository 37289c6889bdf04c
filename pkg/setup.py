"""Build script for the compiled kernels of diskrul.

The extensions are optional: when they cannot be built the package falls
back to the numpy implementations in ``diskrul._pykernels``.

``_clstm`` is compiled with ``-ffast-math`` (compile step only, so no
flush-to-zero startup code is linked) to let gcc vectorize exp/tanh through
glibc's libmvec; AVX2/FMA are enabled when the build machine supports them.
Override with ``DISKRUL_CFLAGS``; skip the build with ``DISKRUL_NO_EXT=1``.
"""
import os
import platform
import sys

from setuptools import Extension, setup


def _host_has(flag):
    try:
        with open("/proc/cpuinfo") as fh:
            return any(flag in line.split() for line in fh if line.startswith("flags"))
    except OSError:
        return False


def _vector_isa():
    return platform.machine() in ("x86_64", "AMD64") and _host_has("avx2") and _host_has("fma")


def _lstm_flags():
    if "DISKRUL_CFLAGS" in os.environ:
        return os.environ["DISKRUL_CFLAGS"].split()
    flags = ["-O3", "-ffast-math"]
    if _vector_isa():
        flags += ["-mavx2", "-mfma"]
    return flags


ext_modules = []
if os.environ.get("DISKRUL_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:  # pragma: no cover - build without cython
        pass
    else:
        macros = [("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")]
        ext_modules = cythonize(
            [
                Extension(
                    "diskrul._clstm",
                    ["src/diskrul/_clstm.pyx"],
                    include_dirs=[np.get_include(), "src/diskrul"],
                    extra_compile_args=_lstm_flags(),
                    # glibc's vector math routines (exp/tanh over SIMD lanes)
                    libraries=["mvec", "m"] if sys.platform.startswith("linux") else [],
                    define_macros=macros,
                ),
                Extension(
                    "diskrul._csplit",
                    ["src/diskrul/_csplit.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=macros,
                ),
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )

setup(ext_modules=ext_modules)
