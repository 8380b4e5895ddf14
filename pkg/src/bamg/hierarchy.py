"""Multilevel operator stack built with Petrov-Galerkin products."""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .smoothing import SmootherParams
from .sparse import CfPartition, DimensionError, SparseMatrix, matmul


@dataclass
class Level:
    """One level of the hierarchy.

    ``P`` interpolates from the next coarser level to this one and ``Q``
    restricts from this level to the next coarser one; both are ``None`` on
    the coarsest level.
    """

    B: SparseMatrix
    T: SparseMatrix
    P: SparseMatrix | None = None
    Q: SparseMatrix | None = None
    part: CfPartition | None = None
    smoother: SmootherParams = SmootherParams()
    grid_dim: int | None = None

    @property
    def n(self):
        return self.B.nrows


@dataclass
class Hierarchy:
    levels: list
    _coarse_pinv: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        sizes = [lvl.n for lvl in self.levels]
        if any(a <= b for a, b in zip(sizes, sizes[1:])):
            raise ValueError(f"level sizes must strictly decrease, got {sizes}")

    def __len__(self):
        return len(self.levels)

    def __getitem__(self, l):
        return self.levels[l]

    @property
    def coarse_pinv(self):
        if self._coarse_pinv is None:
            self._coarse_pinv = np.linalg.pinv(self.levels[-1].B.to_dense())
        return self._coarse_pinv

    def stats(self):
        return [
            {"level": l, "n": lvl.n, "nnz": lvl.B.nnz, "grid": lvl.grid_dim}
            for l, lvl in enumerate(self.levels)
        ]

    def stats_text(self):
        rows = [("level", "n", "nnz", "grid")]
        for s in self.stats():
            grid = "-" if s["grid"] is None else f"{s['grid']}x{s['grid']}"
            rows.append((str(s["level"]), str(s["n"]), str(s["nnz"]), grid))
        widths = [max(len(r[k]) for r in rows) for k in range(4)]
        lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows]
        lines.append(f"operator complexity: {operator_complexity(self):.4f}")
        return "\n".join(lines)

    def stats_csv(self):
        buf = io.StringIO()
        buf.write("level,n,nnz,grid\n")
        for s in self.stats():
            buf.write(f"{s['level']},{s['n']},{s['nnz']},{'' if s['grid'] is None else s['grid']}\n")
        return buf.getvalue()


def build_averaging_restriction(P):
    """Restriction with the transposed sparsity of ``P`` and equal weights.

    Column ``i`` of ``Q`` carries ``1/m_i`` at the ``m_i`` coarse points that
    interpolate to fine point ``i``, so every column of ``Q`` sums to one.
    """
    counts = np.diff(P.indptr)
    if np.any(counts == 0):
        raise ValueError(f"interpolation row {int(np.flatnonzero(counts == 0)[0])} is empty")
    rows = np.repeat(np.arange(P.nrows), counts)
    vals = 1.0 / counts[rows]
    Qt = sp.csr_matrix((vals, P.indices, P.indptr), shape=P.shape)
    return SparseMatrix.from_scipy(Qt.T)


def coarsen_level(B, T, P, Q):
    """``(Q B P, Q T P)``."""
    if B.shape != T.shape or P.nrows != B.ncols or Q.ncols != B.nrows or Q.nrows != P.ncols:
        raise DimensionError(f"B {B.shape}, T {T.shape}, P {P.shape}, Q {Q.shape}")
    return matmul(Q, matmul(B, P)), matmul(Q, matmul(T, P))


def injection_restrict(part, x):
    x = np.asarray(x)
    if x.shape[0] != part.n:
        raise DimensionError(f"vector of length {x.shape[0]} for partition of {part.n}")
    return x[part.cset].copy()


def operator_complexity(h):
    """``sum_l nnz(B_l) / nnz(B_0)`` for a hierarchy or a plain list of levels."""
    levels = h.levels if isinstance(h, Hierarchy) else list(h)
    return sum(lvl.B.nnz for lvl in levels) / levels[0].B.nnz
