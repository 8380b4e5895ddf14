"""Weighted Jacobi relaxation: full, F-only (compatible) and eigen-shifted."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .sparse import DimensionError, extract_blocks

DIAG_TOL = 1e-14
SHIFT_TOL = 1e-12


class ZeroDiagonalError(ArithmeticError):
    def __init__(self, row):
        super().__init__(f"zero or near-zero diagonal entry in row {row}; "
                         "distributive relaxation is not implemented")
        self.row = row


@dataclass(frozen=True)
class SmootherParams:
    omega: float = 0.7
    sweeps: int = 2

    def __post_init__(self):
        if not 0.0 < self.omega <= 1.0:
            raise ValueError(f"omega must lie in (0, 1], got {self.omega}")
        if self.sweeps < 0:
            raise ValueError("sweeps must be non-negative")


def _scaled_inverse_diagonal(M, omega):
    d = M.diagonal()
    small = np.abs(d) <= DIAG_TOL
    if small.any():
        raise ZeroDiagonalError(int(np.flatnonzero(small)[0]))
    return omega / d


def jacobi_sweep(B, x, b=None, p=SmootherParams()):
    """``p.sweeps`` applications of ``x <- x + omega diag(B)^{-1} (b - B x)``."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.shape != (B.ncols,):
        raise DimensionError(f"vector of length {x.shape} for {B.shape} matrix")
    b = np.zeros(B.nrows) if b is None else np.ascontiguousarray(b, dtype=np.float64)
    scale = _scaled_inverse_diagonal(B, p.omega)
    return kernels.jacobi(B.indptr, B.indices, B.data, scale, x, b, p.sweeps)


def f_relax_sweep(B, part, u, p=SmootherParams(), blocks=None):
    """Relax the homogeneous system on F-points only; C entries are copied through."""
    u = np.array(u, dtype=np.float64, copy=True)
    if part.nf == 0:
        return u
    B_ff = (blocks or extract_blocks(B, part))[0]
    u[part.fset] = jacobi_sweep(B_ff, u[part.fset], None, p)
    return u


def shifted_relax(B, T, lam, x, p=SmootherParams()):
    """Jacobi on ``(B - lam T) x = 0``.

    Rows whose shifted diagonal falls below ``SHIFT_TOL`` in magnitude are
    left unchanged.  Returns ``(x, skipped_row_count)``.
    """
    lam = float(np.real(lam))
    M = B if lam == 0.0 else B - T.scaled(lam)
    d = M.diagonal()
    ok = np.abs(d) > SHIFT_TOL
    scale = np.zeros_like(d)
    scale[ok] = p.omega / d[ok]
    x = np.ascontiguousarray(x, dtype=np.float64)
    out = kernels.jacobi(M.indptr, M.indices, M.data, scale, x, np.zeros(M.nrows), p.sweeps)
    return out, int((~ok).sum())
