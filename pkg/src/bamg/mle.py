"""Bootstrap multilevel eigensolver (MLE) setup.

One setup cycle walks down the levels relaxing the test vectors and fitting
least-squares interpolation, solves the coarsest generalized eigenproblem
``B x = lam T x`` exactly, then walks back up interpolating and relaxing the
eigenvector approximations.  The lowest one is the state vector.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .chains import ChainProblem, make_rng
from .coarsening import CrParams, cr_coarsen, full_coarsen_grid
from .hierarchy import Hierarchy, Level, build_averaging_restriction, coarsen_level
from .lsq import LsParams, TestVectorSet, ls_interpolation
from .smoothing import SmootherParams, jacobi_sweep, shifted_relax
from .sparse import SparseMatrix

log = logging.getLogger(__name__)

COMPLEX_TOL = 1e-12


class SetupDivergenceError(RuntimeError):
    """The state residual grew between two setup cycles."""


@dataclass(frozen=True)
class MleParams:
    r: int = 6
    k: int = 6
    mu: int = 1
    setup_cycles: int = 1
    delta: float = 0.05
    tol: float = 1e-8
    max_cycles: int = 40
    coarsest_size: int = 30
    max_levels: int | None = None
    dense_limit: int = 2000
    strict_monotone: bool = True

    def __post_init__(self):
        if self.r < 1 or self.k < 1:
            raise ValueError("need at least one test vector and one eigenpair")
        if self.mu not in (1, 2):
            raise ValueError("cycle index mu must be 1 (V) or 2 (W)")


@dataclass
class EigenPairSet:
    """Eigenpair approximations ordered by ``|lam|``; ``lam[0]`` is pinned to 0."""

    lam: np.ndarray  # complex
    vectors: np.ndarray  # (n, k) real
    imag: np.ndarray  # |Im lam| of the coarse Ritz value each pair came from

    @property
    def k(self):
        return self.lam.shape[0]


def _order_by_magnitude(w):
    return np.lexsort((-np.imag(w), np.real(w), np.round(np.abs(w), 12)))


def _real_vector(v):
    """Rotate a numerically real complex eigenvector onto the real axis."""
    x = np.real(v * np.exp(-1j * np.angle(v[np.argmax(np.abs(v))])))
    return x / np.linalg.norm(x)


def coarsest_eigensolve(B, T, k, cond_limit=1e12):
    """The ``k`` smallest-magnitude eigenpairs of the dense pencil ``(B, T)``.

    Complex pairs are represented by the real or imaginary part of the
    eigenvector: the member of a conjugate pair met first takes whichever
    part is further from the kernel direction, its partner takes the other.
    """
    Bd = B.to_dense() if isinstance(B, SparseMatrix) else np.asarray(B, dtype=np.float64)
    Td = T.to_dense() if isinstance(T, SparseMatrix) else np.asarray(T, dtype=np.float64)
    n = Bd.shape[0]
    cond = np.linalg.cond(Td)
    if not np.isfinite(cond) or cond > cond_limit:
        raise np.linalg.LinAlgError(f"coarse mass matrix is numerically singular (cond {cond:.2e})")
    w, V = np.linalg.eig(np.linalg.solve(Td, Bd))
    order = _order_by_magnitude(w)[: min(k, n)]
    w, V = w[order], V[:, order]
    w[0] = 0.0
    kernel = _real_vector(V[:, 0])
    if kernel.sum() < 0:
        kernel = -kernel
    out = np.empty((n, w.shape[0]))
    out[:, 0] = kernel
    imag = np.zeros(w.shape[0])
    taken = {}
    for t in range(1, w.shape[0]):
        v = V[:, t]
        if abs(np.imag(w[t])) <= COMPLEX_TOL * max(1.0, abs(w[t])):
            x = _real_vector(v)
        else:
            imag[t] = abs(np.imag(w[t]))
            parts = [np.real(v), np.imag(v)]
            parts = [p / np.linalg.norm(p) for p in parts]
            angle = [1.0 - abs(p @ kernel) for p in parts]
            first = int(np.argmax(angle))
            partner = next((s for s in taken if np.isclose(w[s], np.conj(w[t]))), None)
            x = parts[1 - taken.pop(partner)] if partner is not None else parts[first]
            if partner is None:
                taken[t] = first
        out[:, t] = x / np.linalg.norm(x)
    return EigenPairSet(w.astype(np.complex128), out, imag)


def rayleigh_update(B, T, x):
    """``<Bx, x> / <Tx, x>``."""
    den = float(T.matvec(x) @ x)
    if den == 0.0:
        raise ZeroDivisionError("Rayleigh quotient with <Tx, x> = 0")
    return float(B.matvec(x) @ x) / den


def tv_select(lam_before, lam_after, delta=0.05):
    """Indices whose eigenvalue estimate moved by more than ``delta`` (relative).

    Index 0, the state vector, is always selected.
    """
    before = np.asarray(lam_before)
    after = np.asarray(lam_after)
    if before.shape != after.shape:
        raise ValueError("eigenvalue lists differ in length")
    change = np.abs(after - before) / np.maximum(np.abs(after), 1e-14)
    picked = [0] + [int(i) for i in np.flatnonzero(change > delta) if i > 0]
    return picked


@dataclass
class CycleRecord:
    cycle: int
    residual: float
    lambdas: np.ndarray


@dataclass
class SetupResult:
    hierarchy: Hierarchy
    x0: np.ndarray
    eigenpairs: EigenPairSet
    history: list = field(default_factory=list)

    @property
    def residual(self):
        return self.history[-1].residual if self.history else float("nan")


def normalize_state(x):
    x = x / np.linalg.norm(x)
    return -x if x.sum() < 0 else x


class BootstrapSetup:
    """Stateful driver for repeated MLE cycles on one problem.

    ``coarsening`` is ``"full"`` (geometric, needs ``grid_dim``) or ``"cr"``.
    Coarse/fine splittings are fixed the first time a level is reached; the
    operators on every level are refitted each cycle.
    """

    def __init__(self, B, coarsening="full", grid_dim=None, mle=MleParams(),
                 ls=LsParams(), cr=CrParams(), smoother=SmootherParams(), seed=0):
        if coarsening not in ("full", "cr"):
            raise ValueError(f"unknown coarsening '{coarsening}'")
        if coarsening == "full" and grid_dim is None:
            raise ValueError("full coarsening needs the grid side")
        self.B0 = B
        self.coarsening = coarsening
        self.mle = mle
        self.ls = ls
        self.cr = cr
        self.smoother = smoother
        self.seed = seed
        self._parts = {}
        self._grid = {0: grid_dim}
        n = B.nrows
        rng = make_rng(seed)
        # column 0 is the state slot, then r random vectors, then eigen slots
        X = rng.uniform(1.0, 2.0, size=(n, mle.r + 1))
        self.U0 = TestVectorSet(X, state_slot=0)
        self._eigen_cols = {}
        self.levels = []
        self.eigenpairs = None
        self.cycles = 0
        self.uphill_random_unchanged = True

    # -- structure -----------------------------------------------------------

    def _is_coarsest(self, l, n):
        if n <= self.mle.coarsest_size:
            return True
        return self.mle.max_levels is not None and l >= self.mle.max_levels - 1

    def _partition(self, l, B):
        if l not in self._parts:
            if self.coarsening == "full":
                N = self._grid[l]
                part = full_coarsen_grid(N)
                self._grid[l + 1] = (N + 1) // 2
            else:
                part, _ = cr_coarsen(B, None, self.cr, seed=(self.seed, l))
                self._grid[l + 1] = None
            self._parts[l] = part
        return self._parts[l]

    # -- one cycle -----------------------------------------------------------

    def _mle(self, l, B, T, U, levels):
        n = B.nrows
        if self._is_coarsest(l, n):
            if n > self.mle.dense_limit:
                raise ValueError(f"coarsest level has {n} unknowns, above the dense limit")
            levels.append(Level(B, T, smoother=self.smoother, grid_dim=self._grid.get(l)))
            return U, coarsest_eigensolve(B, T, self.mle.k)
        part = self._partition(l, B)
        if part.nc == 0 or part.nc >= n:
            raise ValueError(f"level {l}: coarsening produced {part.nc} of {n} points")
        X = np.column_stack(
            [jacobi_sweep(B, U.vectors[:, j], None, self.smoother) for j in range(U.count)]
        )
        U = TestVectorSet(X, U.state_slot)
        V = np.zeros((n, 0))
        here = len(levels)
        for _ in range(self.mle.mu):
            del levels[here:]
            fit = ls_interpolation(B, part, np.hstack([U.vectors, V]), self.ls)
            P = fit.P
            Q = build_averaging_restriction(P)
            Bc, Tc = coarsen_level(B, T, P, Q)
            levels.append(Level(B, T, P, Q, part, self.smoother, self._grid.get(l)))
            _, coarse = self._mle(l + 1, Bc, Tc, U.restrict(part), levels)
            random_before = U.vectors.copy()
            V = P.to_scipy() @ coarse.vectors
            lam = coarse.lam.copy()
            for i in range(V.shape[1]):
                V[:, i], _ = shifted_relax(B, T, lam[i] if i else 0.0, V[:, i], self.smoother)
                V[:, i] /= np.linalg.norm(V[:, i])
                if i:
                    lam[i] = rayleigh_update(B, T, V[:, i])
            if not np.array_equal(random_before, U.vectors):
                self.uphill_random_unchanged = False
            V[:, 0] = normalize_state(V[:, 0])
            selected = tv_select(coarse.lam, lam, self.mle.delta)
            pairs = EigenPairSet(lam, V, coarse.imag)
        return self._absorb(U, pairs, selected, top=(l == 0)), pairs

    def _absorb(self, U, pairs, selected, top):
        """Write the state vector and selected eigenvectors into the test set."""
        X = U.vectors.copy()
        X[:, U.state_slot] = pairs.vectors[:, 0]
        cols = dict(self._eigen_cols) if top else {}
        extra = []
        for i in selected:
            if i == 0:
                continue
            if i in cols:
                X[:, cols[i]] = pairs.vectors[:, i]
            else:
                cols[i] = X.shape[1] + len(extra)
                extra.append(pairs.vectors[:, i])
        if extra:
            X = np.column_stack([X] + extra)
        if top:
            self._eigen_cols = cols
        return TestVectorSet(X, U.state_slot)

    def cycle(self):
        """Run one MLE cycle; returns the level-0 state residual ``||B x||``."""
        levels = []
        U, pairs = self._mle(0, self.B0, SparseMatrix.identity(self.B0.nrows), self.U0, levels)
        self.U0 = U
        self.levels = levels
        self.eigenpairs = pairs
        self.cycles += 1
        return float(np.linalg.norm(self.B0.matvec(self.state)))

    @property
    def state(self):
        return normalize_state(self.eigenpairs.vectors[:, 0])

    def rebuild(self):
        """Refit every level from the current test sets without relaxing."""
        levels = []
        B, T, U = self.B0, SparseMatrix.identity(self.B0.nrows), self.U0
        l = 0
        while not self._is_coarsest(l, B.nrows):
            part = self._partition(l, B)
            P = ls_interpolation(B, part, U, self.ls).P
            Q = build_averaging_restriction(P)
            levels.append(Level(B, T, P, Q, part, self.smoother, self._grid.get(l)))
            B, T = coarsen_level(B, T, P, Q)
            U = U.restrict(part)
            l += 1
        levels.append(Level(B, T, smoother=self.smoother, grid_dim=self._grid.get(l)))
        self.levels = levels
        return Hierarchy(levels)

    def hierarchy(self):
        return Hierarchy(self.levels)


def _setup_from_problem(problem, coarsening, mle, ls, cr, smoother, seed):
    if coarsening is None:
        coarsening = "full" if problem.grid_dim is not None and problem.grid_dim % 2 else "cr"
    return BootstrapSetup(problem.system_matrix(), coarsening, problem.grid_dim, mle, ls, cr,
                          smoother, seed)


def run_setup(problem: ChainProblem, p=MleParams(), coarsening=None, ls=LsParams(),
              cr=CrParams(), smoother=SmootherParams(), seed=0, cycles=None, until_tol=False):
    """Run bootstrap setup cycles and rebuild the hierarchy from the final test sets.

    ``cycles`` defaults to ``p.setup_cycles``.  With ``until_tol`` the cycles
    continue (up to ``p.max_cycles``) until ``||B x0|| <= p.tol``.
    """
    boot = _setup_from_problem(problem, coarsening, p, ls, cr, smoother, seed)
    limit = p.max_cycles if until_tol else (p.setup_cycles if cycles is None else cycles)
    history = []
    for c in range(1, limit + 1):
        res = boot.cycle()
        history.append(CycleRecord(c, res, np.real(boot.eigenpairs.lam).copy()))
        log.info("MLE cycle %d: ||B x|| = %.3e", c, res)
        if p.strict_monotone and len(history) > 1 and res > history[-2].residual:
            raise SetupDivergenceError(
                f"state residual grew from {history[-2].residual:.3e} to {res:.3e} "
                f"in cycle {c}"
            )
        if until_tol and res <= p.tol:
            break
    h = boot.rebuild()
    return SetupResult(h, boot.state, boot.eigenpairs, history)
