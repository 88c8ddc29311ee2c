"""Build the optional compiled kernel.

The extension is marked optional: when Cython or a C compiler is missing the
package still installs and runs on the pure-Python kernel.
"""
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "verifly._ckernel",
                ["src/verifly/_ckernel.pyx"],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
