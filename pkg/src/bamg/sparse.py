"""Row-compressed sparse matrices and the graph queries built on them."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from . import kernels

MATMUL_DROP_TOL = 1e-15


class DimensionError(ValueError):
    pass


class SparseMatrix:
    """Immutable real sparse matrix in CSR layout.

    Column indices are sorted within each row, there are no duplicate
    entries and no stored zeros.  Construct with :func:`from_triplets` or
    :meth:`from_scipy`.
    """

    __slots__ = ("nrows", "ncols", "indptr", "indices", "data", "_scipy")

    def __init__(self, nrows, ncols, indptr, indices, data):
        self.nrows = int(nrows)
        self.ncols = int(ncols)
        self.indptr = np.ascontiguousarray(indptr, dtype=np.intp)
        self.indices = np.ascontiguousarray(indices, dtype=np.intp)
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        for a in (self.indptr, self.indices, self.data):
            a.flags.writeable = False
        self._scipy = None

    @classmethod
    def from_scipy(cls, m, drop_tol=0.0):
        m = sp.csr_matrix(m, dtype=np.float64, copy=True)
        m.sum_duplicates()
        if drop_tol > 0.0 and m.nnz:
            m.data[np.abs(m.data) <= drop_tol] = 0.0
        m.eliminate_zeros()
        m.sort_indices()
        return cls(m.shape[0], m.shape[1], m.indptr, m.indices, m.data)

    @classmethod
    def identity(cls, n):
        return cls(n, n, np.arange(n + 1), np.arange(n), np.ones(n))

    @property
    def shape(self):
        return (self.nrows, self.ncols)

    @property
    def nnz(self):
        return int(self.data.shape[0])

    def to_scipy(self):
        if self._scipy is None:
            m = sp.csr_matrix((self.data, self.indices, self.indptr), shape=self.shape)
            m.has_sorted_indices = True
            self._scipy = m
        return self._scipy

    def to_dense(self):
        return self.to_scipy().toarray()

    def diagonal(self):
        return self.to_scipy().diagonal()

    def row(self, i):
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.data[lo:hi]

    def matvec(self, x):
        return matvec(self, x)

    def __matmul__(self, other):
        if isinstance(other, SparseMatrix):
            return matmul(self, other)
        return matvec(self, np.asarray(other, dtype=np.float64))

    @property
    def T(self):
        return transpose(self)

    def __sub__(self, other):
        _check_same_shape(self, other)
        return SparseMatrix.from_scipy(self.to_scipy() - other.to_scipy())

    def __add__(self, other):
        _check_same_shape(self, other)
        return SparseMatrix.from_scipy(self.to_scipy() + other.to_scipy())

    def scaled(self, alpha):
        return SparseMatrix.from_scipy(self.to_scipy() * float(alpha))

    def __eq__(self, other):
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.data, other.data)
        )

    __hash__ = None

    def __repr__(self):
        return f"SparseMatrix({self.nrows}x{self.ncols}, nnz={self.nnz})"


def _check_same_shape(a, b):
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")


def from_triplets(nrows, ncols, triplets):
    """Assemble from ``(row, col, value)`` triplets, summing duplicates."""
    if len(triplets) == 0:
        return SparseMatrix(nrows, ncols, np.zeros(nrows + 1), [], [])
    t = np.asarray(triplets, dtype=np.float64).reshape(-1, 3)
    rows = t[:, 0].astype(np.intp)
    cols = t[:, 1].astype(np.intp)
    if rows.min() < 0 or rows.max() >= nrows or cols.min() < 0 or cols.max() >= ncols:
        raise IndexError(f"triplet index out of range for {nrows}x{ncols} matrix")
    m = sp.coo_matrix((t[:, 2], (rows, cols)), shape=(nrows, ncols))
    return SparseMatrix.from_scipy(m)


def matvec(M, x):
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != M.ncols:
        raise DimensionError(f"matvec: {M.shape} times vector of length {x.shape}")
    return kernels.csr_matvec(M.indptr, M.indices, M.data, x)


def transpose(M):
    return SparseMatrix.from_scipy(M.to_scipy().T)


def matmul(left, right, drop_tol=MATMUL_DROP_TOL):
    """Sparse product; entries below ``drop_tol * max|entry|`` are dropped."""
    if left.ncols != right.nrows:
        raise DimensionError(f"matmul: {left.shape} @ {right.shape}")
    prod = left.to_scipy() @ right.to_scipy()
    prod = sp.csr_matrix(prod)
    thresh = drop_tol * (np.abs(prod.data).max() if prod.nnz else 0.0)
    return SparseMatrix.from_scipy(prod, drop_tol=thresh)


@dataclass(frozen=True)
class CfPartition:
    """Splitting of ``0..n-1`` into coarse and fine index sets (both sorted)."""

    n: int
    cset: np.ndarray
    fset: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.cset, dtype=np.intp)
        f = np.asarray(self.fset, dtype=np.intp)
        both = np.concatenate([c, f])
        if both.size != self.n or not np.array_equal(np.sort(both), np.arange(self.n)):
            raise ValueError("partition is not a disjoint cover of 0..n-1")
        c = np.sort(c)
        f = np.sort(f)
        c.flags.writeable = False
        f.flags.writeable = False
        object.__setattr__(self, "cset", c)
        object.__setattr__(self, "fset", f)

    @classmethod
    def from_coarse(cls, n, cset):
        cset = np.unique(np.asarray(cset, dtype=np.intp))
        mask = np.ones(n, dtype=bool)
        mask[cset] = False
        return cls(n, cset, np.flatnonzero(mask))

    @property
    def nc(self):
        return int(self.cset.size)

    @property
    def nf(self):
        return int(self.fset.size)

    def is_coarse(self):
        mask = np.zeros(self.n, dtype=bool)
        mask[self.cset] = True
        return mask

    def coarse_index(self):
        """Map fine index -> coarse index (``-1`` on F-points)."""
        idx = np.full(self.n, -1, dtype=np.intp)
        idx[self.cset] = np.arange(self.nc)
        return idx


def extract_blocks(M, part):
    """Return ``(M_ff, M_fc, M_cf, M_cc)`` in the induced F and C orderings."""
    if M.nrows != part.n or M.ncols != part.n:
        raise DimensionError(f"partition of size {part.n} for {M.shape} matrix")
    s = M.to_scipy()
    f, c = part.fset, part.cset
    blocks = (s[f][:, f], s[f][:, c], s[c][:, f], s[c][:, c])
    return tuple(SparseMatrix.from_scipy(b) for b in blocks)


def _adjacency(M):
    """Off-diagonal nonzero pattern of ``M`` as a boolean CSR matrix."""
    s = M.to_scipy().tocoo()
    keep = (s.row != s.col) & (s.data != 0.0)
    return sp.csr_matrix(
        (np.ones(int(keep.sum()), dtype=bool), (s.row[keep], s.col[keep])), shape=M.shape
    )


def neighborhood(M, i, z, targets):
    """Indices in ``targets`` reachable from ``i`` by a directed path of length <= z.

    Edges of G(M) are the off-diagonal nonzeros ``(i, j)``; ``i`` itself is
    never returned.
    """
    if z not in (1, 2, 3):
        raise ValueError("path length bound z must be 1, 2 or 3")
    targets = set(int(t) for t in targets)
    seen = {i: 0}
    queue = deque([i])
    while queue:
        u = queue.popleft()
        if seen[u] == z:
            continue
        cols, vals = M.row(u)
        for v, a in zip(cols, vals):
            v = int(v)
            if v != u and a != 0.0 and v not in seen:
                seen[v] = seen[u] + 1
                queue.append(v)
    return sorted(v for v in seen if v != i and v in targets)


def reachability(M, z):
    """Boolean CSR matrix of pairs joined by a directed path of length 1..z."""
    G = _adjacency(M).astype(np.int8)
    reach = G.copy()
    power = G
    for _ in range(z - 1):
        power = (power @ G).astype(bool).astype(np.int8)
        reach = (reach + power).astype(bool).astype(np.int8)
    reach = sp.csr_matrix(reach)
    reach.setdiag(0)
    reach.eliminate_zeros()
    return reach.astype(bool)


def strong_components(M):
    if M.nrows != M.ncols:
        raise DimensionError("strong components need a square matrix")
    ncomp, _ = connected_components(_adjacency(M), directed=True, connection="strong")
    return int(ncomp)


def symmetric_adjacency(M):
    """Undirected version of G(M) as boolean CSR."""
    G = _adjacency(M)
    return sp.csr_matrix((G + G.T).astype(bool))


# -- MatrixMarket ---------------------------------------------------------------


def write_matrix_market(path, M, comment=None):
    """Coordinate real general file; ``comment`` lines go into the header."""
    scipy.io.mmwrite(str(path), M.to_scipy().tocoo(), comment=comment or "", field="real",
                     symmetry="general")


def read_matrix_market(path):
    """Read a real (or pattern) coordinate file; symmetric storage is expanded."""
    try:
        M = scipy.io.mmread(str(path))
    except (ValueError, OSError) as exc:
        raise ValueError(f"{path}: {exc}") from exc
    if not sp.issparse(M):
        raise ValueError(f"{path}: only coordinate (sparse) files are supported")
    if np.iscomplexobj(M.data):
        raise ValueError(f"{path}: complex entries are not supported")
    return SparseMatrix.from_scipy(M)
