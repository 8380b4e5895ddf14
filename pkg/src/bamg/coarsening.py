"""Coarse-variable selection: geometric full coarsening and compatible relaxation."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .smoothing import SmootherParams, f_relax_sweep
from .sparse import CfPartition, extract_blocks, symmetric_adjacency

log = logging.getLogger(__name__)


class CoarseningWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class CrParams:
    theta: float = 0.85
    nu: int = 8
    init_range: tuple = (1.0, 2.0)
    omega: float = 0.7
    max_passes: int = 50

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise ValueError("CR tolerance theta must lie in (0, 1)")
        if self.nu < 1:
            raise ValueError("CR needs at least one sweep")


def full_coarsen_grid(N):
    """Every other lattice point in both directions of an N x N grid (N odd)."""
    if N % 2 == 0 or N < 3:
        raise ValueError(f"full coarsening needs an odd grid side >= 3, got {N}")
    r, c = np.divmod(np.arange(N * N), N)
    return CfPartition.from_coarse(N * N, np.flatnonzero((r % 2 == 0) & (c % 2 == 0)))


@dataclass
class CrMeasure:
    rho: float
    ratios: np.ndarray  # per fine point |u^nu| / |u^{nu-1}|, zero where converged


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def cr_quality(B, part, p=CrParams(), seed=0):
    """Estimate the F-relaxation convergence rate from a random positive start."""
    rng = _rng(seed)
    if part.nf == 0:
        return CrMeasure(0.0, np.zeros(0))
    lo, hi = p.init_range
    u = np.zeros(part.n)
    u[part.fset] = rng.uniform(lo, hi, part.nf)
    u0 = np.linalg.norm(u[part.fset])
    blocks = extract_blocks(B, part)
    one = SmootherParams(p.omega, 1)
    prev = u
    for _ in range(p.nu):
        prev, u = u, f_relax_sweep(B, part, u, one, blocks=blocks)
    uf, pf = np.abs(u[part.fset]), np.abs(prev[part.fset])
    ratios = np.zeros(part.nf)
    live = pf >= 1e-14
    ratios[live] = uf[live] / pf[live]
    rho = (np.linalg.norm(uf) / u0) ** (1.0 / p.nu)
    return CrMeasure(float(rho), ratios)


def greedy_independent_set(G, candidates):
    """Maximal independent subset of ``candidates`` in the undirected graph of G.

    Vertices are visited by descending degree inside the candidate-induced
    subgraph, ties broken by lower index.
    """
    cand = np.unique(np.asarray(candidates, dtype=np.intp))
    if cand.size == 0:
        return cand
    adj = symmetric_adjacency(G)
    sub = adj[cand][:, cand]
    deg = np.diff(sub.indptr)
    order = cand[np.lexsort((cand, -deg))]
    blocked = np.zeros(G.nrows, dtype=bool)
    chosen = []
    for v in order:
        if blocked[v]:
            continue
        chosen.append(v)
        blocked[v] = True
        blocked[adj.indices[adj.indptr[v] : adj.indptr[v + 1]]] = True
    return np.sort(np.asarray(chosen, dtype=np.intp))


def cr_coarsen(B, c0=None, p=CrParams(), seed=0):
    """Grow the coarse set until compatible relaxation converges at rate <= theta.

    ``c0=None`` seeds the coarse set with an independent set of the full
    graph; pass an empty sequence to start from scratch.  Returns
    ``(partition, history)`` where history lists ``(|C|, rho_f)`` per pass.
    """
    rng = _rng(seed)
    n = B.nrows
    if c0 is None:
        c0 = greedy_independent_set(B, np.arange(n))
    part = CfPartition.from_coarse(n, c0)
    meas = cr_quality(B, part, p, rng)
    history = [(part.nc, meas.rho)]
    passes = 0
    while meas.rho > p.theta:
        if part.nf == 0 or passes >= p.max_passes:
            warnings.warn(
                f"compatible relaxation stalled at rho_f={meas.rho:.3f} with |C|={part.nc}",
                CoarseningWarning,
                stacklevel=2,
            )
            break
        slow = part.fset[meas.ratios > p.theta]
        if slow.size == 0:
            # aggregate rate above theta while no single point is: take the slowest
            slow = part.fset[meas.ratios >= meas.ratios.max()]
        new = greedy_independent_set(B, slow)
        part = CfPartition.from_coarse(n, np.concatenate([part.cset, new]))
        meas = cr_quality(B, part, p, rng)
        history.append((part.nc, meas.rho))
        passes += 1
    if part.nf == 0 and n > 0:
        warnings.warn("compatible relaxation selected every point as coarse",
                      CoarseningWarning, stacklevel=2)
    log.debug("CR coarsening: %s", history)
    return part, history
