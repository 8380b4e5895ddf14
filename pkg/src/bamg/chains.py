"""Test Markov chains: generators, self-transition removal, ingestion, validation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay, QhullError

from .sparse import (SparseMatrix, from_triplets, read_matrix_market, strong_components,
                     write_matrix_market)

log = logging.getLogger(__name__)

TANDEM_RATES = (11 / 31, 10 / 31, 10 / 31)


@dataclass
class ChainProblem:
    """A column-stochastic transition matrix with zero diagonal plus provenance."""

    A: SparseMatrix
    kind: str
    grid_dim: int | None = None
    seed: int | None = None
    points: np.ndarray | None = None
    params: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.A.nrows

    def system_matrix(self):
        """``B = I - A``."""
        return SparseMatrix.identity(self.n) - self.A


def make_rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


def _from_columns(n, cols):
    """Build A from ``{source: [(target, weight), ...]}``, normalising each column."""
    trip = []
    for j, moves in cols.items():
        total = sum(w for _, w in moves)
        if total <= 0:
            raise ValueError(f"state {j} has no outgoing transition")
        trip.extend((i, j, w / total) for i, w in moves)
    return from_triplets(n, n, trip)


def gen_uniform_network(N):
    """Random walk on the 4-point N x N lattice: ``a_ij = 1/d_out(j)``."""
    if N < 2:
        raise ValueError("grid side must be at least 2")
    cols = {}
    for r in range(N):
        for c in range(N):
            nbrs = [(r + dr, c + dc) for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1))]
            cols[r * N + c] = [
                (rr * N + cc, 1.0) for rr, cc in nbrs if 0 <= rr < N and 0 <= cc < N
            ]
    return ChainProblem(_from_columns(N * N, cols), "uniform-grid", grid_dim=N)


def gen_tandem_queue(N, mu=TANDEM_RATES[0], mu_x=TANDEM_RATES[1], mu_y=TANDEM_RATES[2]):
    """Two queues in tandem on an N x N state grid.

    From state ``(i, j)`` (queue lengths): arrival to ``(i+1, j)`` with weight
    ``mu``, transfer to ``(i-1, j+1)`` with ``mu_x``, departure to ``(i, j-1)``
    with ``mu_y``.  Moves leaving the grid are dropped and the remaining
    weights renormalised.
    """
    if min(mu, mu_x, mu_y) <= 0:
        raise ValueError("tandem rates must be positive")
    if N < 2:
        raise ValueError("grid side must be at least 2")
    cols = {}
    for i in range(N):
        for j in range(N):
            cand = [((i + 1, j), mu), ((i - 1, j + 1), mu_x), ((i, j - 1), mu_y)]
            cols[i * N + j] = [
                (a * N + b, w) for (a, b), w in cand if 0 <= a < N and 0 <= b < N
            ]
    params = {"mu": mu, "mu_x": mu_x, "mu_y": mu_y}
    return ChainProblem(_from_columns(N * N, cols), "tandem-queue", grid_dim=N, params=params)


def planar_chain_from_points(points):
    """Random walk on the Delaunay triangulation of ``points``."""
    points = np.asarray(points, dtype=np.float64)
    tri = Delaunay(points)
    indptr, nbr = tri.vertex_neighbor_vertices
    n = points.shape[0]
    cols = {j: [(int(i), 1.0) for i in nbr[indptr[j] : indptr[j + 1]]] for j in range(n)}
    return _from_columns(n, cols)


def gen_planar_graph(N, seed=0, max_retries=5):
    """Delaunay triangulation of N uniform random points in the unit square."""
    if N < 4:
        raise ValueError("planar graph needs at least 4 points")
    rng = make_rng(seed)
    points = rng.random((N, 2))
    for attempt in range(max_retries + 1):
        try:
            A = planar_chain_from_points(points)
            break
        except QhullError:
            if attempt == max_retries:
                raise
            log.warning("degenerate point set (seed %s); perturbing and retrying", seed)
            points = points + 1e-12 * rng.standard_normal(points.shape)
    return ChainProblem(A, "planar-graph", seed=seed, points=points)


def strip_self_transitions(A):
    """Remove self loops: ``a'_ij = a_ij / (1 - a_jj)`` for ``i != j``, ``a'_jj = 0``."""
    d = A.diagonal()
    if np.any(d >= 1.0):
        bad = int(np.flatnonzero(d >= 1.0)[0])
        raise ValueError(f"state {bad} is absorbing (a_jj = 1); chain is reducible")
    s = A.to_scipy().tocoo()
    off = s.row != s.col
    vals = s.data[off] / (1.0 - d[s.col[off]])
    return from_triplets(
        A.nrows, A.ncols, list(zip(s.row[off].tolist(), s.col[off].tolist(), vals.tolist()))
    )


def _header_fields(path):
    """``key=value`` tokens from the leading comment block of a MatrixMarket file."""
    fields = {}
    with open(path) as fh:
        next(fh, None)
        for line in fh:
            if not line.startswith("%"):
                break
            for tok in line[1:].split():
                key, sep, val = tok.partition("=")
                if sep:
                    fields[key] = val
    return fields


def load_matrix_market(path):
    """Read a transition matrix.

    A ``grid_dim=N`` token in the header comments marks a structured grid so
    geometric coarsening can be reused.
    """
    A = read_matrix_market(path)
    if A.nrows != A.ncols:
        raise ValueError(f"{path}: transition matrix must be square, got {A.shape}")
    meta = _header_fields(path)
    grid = int(meta["grid_dim"]) if "grid_dim" in meta else None
    if grid is not None and grid * grid != A.nrows:
        raise ValueError(f"{path}: grid_dim={grid} does not match {A.nrows} states")
    return ChainProblem(A, meta.get("kind", "external"), grid_dim=grid,
                        params={"path": str(Path(path))})


def save_matrix_market(path, problem):
    """Write ``problem.A`` with its kind, grid side and seed in the header."""
    meta = [f"kind={problem.kind}"]
    if problem.grid_dim is not None:
        meta.append(f"grid_dim={problem.grid_dim}")
    if problem.seed is not None:
        meta.append(f"seed={problem.seed}")
    write_matrix_market(path, problem.A, " ".join(meta))


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst_index: int | None
    worst_value: float


@dataclass
class ValidationReport:
    checks: list

    @property
    def ok(self):
        return all(c.passed for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def format(self):
        lines = []
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            where = "" if c.worst_index is None else f" (worst index {c.worst_index})"
            lines.append(f"{status}  {c.name}: {c.worst_value:.3e}{where}")
        return "\n".join(lines)


def validate(problem):
    """Check column-stochasticity, zero diagonal with entries in [0, 1], irreducibility."""
    A = problem.A
    n = A.nrows
    colsum = np.asarray(A.to_scipy().sum(axis=0)).ravel()
    dev = np.abs(colsum - 1.0)
    j = int(np.argmax(dev)) if n else None
    checks = [CheckResult("column-stochastic", bool(dev.max(initial=0.0) <= 1e-13 * n), j,
                          float(dev.max(initial=0.0)))]

    diag = np.abs(A.diagonal())
    rows = np.repeat(np.arange(n), np.diff(A.indptr))
    out_of_range = np.maximum(-A.data, A.data - 1.0).clip(min=0.0)
    bad_entry = np.zeros(n)
    np.maximum.at(bad_entry, rows, out_of_range)
    entry_dev = np.maximum(diag, bad_entry)
    k = int(np.argmax(entry_dev)) if n else None
    checks.append(CheckResult("zero-diagonal-and-range", bool(entry_dev.max(initial=0.0) == 0.0),
                              k, float(entry_dev.max(initial=0.0))))

    ncomp = strong_components(A)
    checks.append(CheckResult("irreducible", ncomp == 1, None, float(ncomp)))
    return ValidationReport(checks)


def write_points_csv(path, points):
    np.savetxt(path, points, delimiter=",", header="x,y", comments="", fmt="%.17g")
