from setuptools import setup, Extension

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("xmrange._ext.kernels", ["src/xmrange/_ext/kernels.pyx"])],
        language_level=3,
    )

setup(ext_modules=ext_modules)
