import os

from setuptools import setup

ext_modules = []
if os.environ.get("MTLAB_PURE_PYTHON") != "1":
    try:
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [Extension("mtlab._ckernels", ["src/mtlab/_kernels.py"])],
            compiler_directives={"language_level": 3},
        )

setup(ext_modules=ext_modules)
