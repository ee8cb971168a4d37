"""Build script: compiles the Cython kernel when Cython is available."""
from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    from setuptools import Extension
except ImportError:  # pure-Python install
    pass
else:
    # -ffp-contract=off keeps the noise arithmetic bit-identical to Python
    ext_modules = cythonize(
        [Extension("wawlab._core", ["src/wawlab/_core.pyx"],
                   extra_compile_args=["-O3", "-ffp-contract=off"])],
        compiler_directives={"language_level": 3},
    )

setup(ext_modules=ext_modules)
