"""Build script. The compiled round-loop kernel is optional: if Cython or a
C toolchain is unavailable the package installs anyway and falls back to the
pure-Python kernel at import time."""
import os

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    # -ffp-contract=off keeps C arithmetic bitwise-identical to the Python
    # kernel (no fused multiply-add); no -march flags for the same reason.
    ext_modules = cythonize(
        [
            Extension(
                "netlsq.kernels._ext",
                ["src/netlsq/kernels/_ext.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": 3},
    )
except Exception as exc:  # pragma: no cover - toolchain-dependent
    if os.environ.get("NETLSQ_REQUIRE_EXT"):
        raise
    print(f"netlsq: building without compiled kernel ({exc!r})")

setup(ext_modules=ext_modules)
