import numpy as np
from setuptools import Extension, setup
from Cython.Build import cythonize

# No -ffast-math / -march: the kernel must stay bit-identical to the
# pure-Python reference backend (strict IEEE double, no FMA contraction).
ext = Extension(
    "spaox.transport._kernel",
    sources=["src/spaox/transport/_kernel.pyx"],
    extra_compile_args=["-O3"],
)

setup(
    ext_modules=cythonize(
        [ext],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    ),
    include_dirs=[np.get_include()],
)
