"""Backend selection for the hot tridiagonal kernels.

The compiled Cython module is used when it was built; otherwise the
pure-Python fallback is imported. Setting ``DRIFTLAB_PURE_PYTHON=1`` forces
the fallback.
"""

import os

from . import _kernels_py

if os.environ.get("DRIFTLAB_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

solve_tridiagonal = _impl.solve_tridiagonal
march_tridiagonal = _impl.march_tridiagonal
march_tridiagonal_adjoint = _impl.march_tridiagonal_adjoint

__all__ = ["BACKEND", "solve_tridiagonal", "march_tridiagonal",
           "march_tridiagonal_adjoint"]
