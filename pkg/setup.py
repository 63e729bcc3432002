from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # no Cython: ship the pure-Python kernel only
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "harmonic_nvod._ckernel",
                ["src/harmonic_nvod/_ckernel.pyx"],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
