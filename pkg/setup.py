import warnings

from setuptools import Extension, setup


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        warnings.warn("Cython not available; installing the pure-Python kernels only")
        return []
    ext = Extension("fwscope._ckernels", ["src/fwscope/_ckernels.pyx"], optional=True)
    return cythonize([ext], language_level=3)


setup(ext_modules=extensions())
