import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "stickymc._ext",
                ["src/stickymc/_ext.pyx"],
                extra_compile_args=["-O3", "-ffp-contract=off"],
                include_dirs=[numpy.get_include()],
            )
        ],
        language_level=3,
    )
except ImportError:
    # Pure-python backend is selected at import time when the extension
    # is unavailable; the package still installs and works.
    ext_modules = []

setup(ext_modules=ext_modules)
