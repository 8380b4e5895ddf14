"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise the numpy
fallback.  Set ``BAMG_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

if os.environ.get("BAMG_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _fallback
        BACKEND = "python"

csr_matvec = _impl.csr_matvec
jacobi = _impl.jacobi
ls_greedy = _impl.ls_greedy

__all__ = ["BACKEND", "csr_matvec", "jacobi", "ls_greedy"]
