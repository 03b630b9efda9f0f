import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("HEILBRONNLAB_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "heilbronnlab._kernels",
                    ["src/heilbronnlab/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    # exact IEEE double semantics: the double-double code breaks under fma contraction
                    extra_compile_args=["-O3", "-ffp-contract=off", "-fno-fast-math"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
