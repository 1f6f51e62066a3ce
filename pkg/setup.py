import os
import sys

from setuptools import Extension, setup


def extensions():
    if os.environ.get("MEMSHAPE_NO_EXT"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError as exc:
        print(f"memshape: building without the compiled kernel ({exc})", file=sys.stderr)
        return []
    ext = Extension(
        "memshape.sim._ckernel",
        ["src/memshape/sim/_ckernel.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions())
