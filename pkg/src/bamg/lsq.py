"""Least-squares interpolation fitted to test vectors, one fine row at a time."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .sparse import SparseMatrix, reachability


class EmptyNeighborhoodError(RuntimeError):
    def __init__(self, point, z):
        super().__init__(f"fine point {point} has no coarse neighbour within path length {z}")
        self.point = point


@dataclass
class TestVectorSet:
    """Test vectors stored column-wise in an ``(n, K)`` array.

    ``state_slot`` is the column holding the current state-vector
    approximation.
    """

    __test__ = False  # not a pytest class

    vectors: np.ndarray
    state_slot: int = 0

    def __post_init__(self):
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2:
            raise ValueError("test vectors must be an (n, K) array")
        if not 0 <= self.state_slot < self.vectors.shape[1]:
            raise ValueError("state slot out of range")

    @property
    def n(self):
        return self.vectors.shape[0]

    @property
    def count(self):
        return self.vectors.shape[1]

    def restrict(self, part):
        """Injection onto the coarse points."""
        return TestVectorSet(self.vectors[part.cset], self.state_slot)


@dataclass(frozen=True)
class LsParams:
    caliber: int = 2
    max_path: int = 3
    min_candidates: int | None = None  # defaults to the caliber
    eps: float = 1e-16
    dep_tol: float = 1e-10

    def __post_init__(self):
        if self.caliber < 1:
            raise ValueError("caliber must be at least 1")
        if self.max_path not in (1, 2, 3):
            raise ValueError("neighbourhood path bound must be 1, 2 or 3")


def tv_weights(B, X, eps=LsParams.eps):
    """``1 / (||B x||^2 + eps ||x||^2)`` for each column of ``X``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    res = B.to_scipy() @ X
    return 1.0 / (np.einsum("ij,ij->j", res, res) + eps * np.einsum("ij,ij->j", X, X))


def ls_fit_row(X, w, i, J):
    """Minimise ``sum_k w_k (x_i^k - sum_j p_j x_j^k)^2`` over ``p``.

    Uses an SVD-based minimum-norm solve, so rank-deficient sets are fine.
    Returns ``(p, L)``.
    """
    J = list(J)
    if not J:
        raise ValueError("interpolation set must be non-empty")
    sw = np.sqrt(np.asarray(w, dtype=np.float64))
    A = (X[J] * sw).T
    y = sw * X[i]
    p, *_ = np.linalg.lstsq(A, y, rcond=None)
    r = y - A @ p
    return p, float(r @ r)


def coarse_neighborhoods(B, part, max_path=3, min_size=1):
    """Coarse candidates for each F-point.

    The path bound grows from 1 until a point has at least ``min_size``
    candidates (or the bound reaches ``max_path``; any non-empty set is then
    accepted).

    Returns ``(nb_ptr, nb_idx, z_used)`` with candidates as fine indices in
    ascending order.
    """
    nf = part.nf
    found = [None] * nf
    z_used = np.zeros(nf, dtype=np.intp)
    todo = np.arange(nf)
    for z in range(1, max_path + 1):
        if todo.size == 0:
            break
        reach = reachability(B, z)[part.fset[todo]][:, part.cset].tocsr()
        reach.sort_indices()
        still = []
        for k, r in enumerate(todo):
            cols = reach.indices[reach.indptr[k] : reach.indptr[k + 1]]
            if cols.size >= min_size or (cols.size and z == max_path):
                found[r] = part.cset[cols]
                z_used[r] = z
            else:
                still.append(r)
        todo = np.asarray(still, dtype=np.intp)
    if todo.size:
        raise EmptyNeighborhoodError(int(part.fset[todo[0]]), max_path)
    lengths = np.array([f.size for f in found], dtype=np.intp)
    nb_ptr = np.concatenate([[0], np.cumsum(lengths)]).astype(np.intp)
    nb_idx = np.concatenate(found).astype(np.intp) if nf else np.zeros(0, dtype=np.intp)
    return nb_ptr, nb_idx, z_used


@dataclass
class Interpolation:
    P: SparseMatrix
    lsteps: np.ndarray  # fit value after each greedy step, per F-row
    z_used: np.ndarray


def ls_interpolation(B, part, tvs, p=LsParams(), weights=None):
    X = tvs.vectors if isinstance(tvs, TestVectorSet) else np.ascontiguousarray(tvs)
    w = tv_weights(B, X, p.eps) if weights is None else np.asarray(weights, dtype=np.float64)
    n, nc = part.n, part.nc
    cidx = part.coarse_index()
    if part.nf:
        want = p.caliber if p.min_candidates is None else p.min_candidates
        nb_ptr, nb_idx, z_used = coarse_neighborhoods(B, part, p.max_path, want)
        sel, coef, nsel, lsteps, deficient = kernels.ls_greedy(
            X, w, part.fset, nb_ptr, nb_idx, p.caliber, p.dep_tol
        )
        for r in np.flatnonzero(deficient):
            J = sel[r, : nsel[r]]
            coef[r, : nsel[r]], _ = ls_fit_row(X, w, part.fset[r], J)
    else:
        sel = np.zeros((0, p.caliber), dtype=np.intp)
        coef = np.zeros((0, p.caliber))
        nsel = np.zeros(0, dtype=np.intp)
        lsteps = np.zeros((0, p.caliber + 1))
        z_used = np.zeros(0, dtype=np.intp)
    used = np.arange(p.caliber)[None, :] < nsel[:, None]
    rows = np.concatenate([part.cset, np.repeat(part.fset, nsel)])
    cols = np.concatenate([np.arange(nc), cidx[sel[used]]])
    vals = np.concatenate([np.ones(nc), coef[used]])
    P = SparseMatrix.from_scipy(sp.coo_matrix((vals, (rows, cols)), shape=(n, nc)))
    return Interpolation(P, lsteps, z_used)


def build_interpolation(B, part, tvs, p=LsParams()):
    """Interpolation ``P`` (fine x coarse): identity on C-rows, LS-fitted F-rows."""
    return ls_interpolation(B, part, tvs, p).P
