import os

from setuptools import setup

ext_modules = []
if os.environ.get("NHTRAP_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
        import numpy as np
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "nhtrap._flowcore",
                    ["src/nhtrap/_flowcore.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )

setup(ext_modules=ext_modules)
