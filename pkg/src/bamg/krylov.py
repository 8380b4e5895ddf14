"""Multigrid-preconditioned Krylov solvers for the homogeneous system ``B x = 0``."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .mle import normalize_state
from .smoothing import jacobi_sweep

log = logging.getLogger(__name__)


class KrylovBreakdown(RuntimeError):
    pass


@dataclass(frozen=True)
class KrylovParams:
    tol: float = 1e-8
    max_iters: int = 200
    mode: str = "gmres"

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")
        if self.mode not in ("gmres", "arnoldi"):
            raise ValueError(f"unknown Krylov mode '{self.mode}'")


@dataclass
class KrylovResult:
    x: np.ndarray
    iterations: int
    converged: bool
    # rows of (iteration, preconditioned residual, true residual ||B x||)
    history: list = field(default_factory=list)
    ritz: list = field(default_factory=list)

    @property
    def residual(self):
        return self.history[-1][2]


def vcycle_apply(h, r, l=0):
    """One V-cycle for ``B_l z = r`` from ``z = 0``; the coarsest level uses the pseudoinverse."""
    lvl = h.levels[l]
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (lvl.n,):
        raise ValueError(f"residual of length {r.shape} on level {l} of size {lvl.n}")
    if l == len(h.levels) - 1:
        return h.coarse_pinv @ r
    z = jacobi_sweep(lvl.B, np.zeros(lvl.n), r, lvl.smoother)
    rc = lvl.Q.matvec(r - lvl.B.matvec(z))
    z = z + lvl.P.matvec(vcycle_apply(h, rc, l + 1))
    return jacobi_sweep(lvl.B, z, r, lvl.smoother)


def preconditioned_operator(h, B):
    """``v -> C B v`` with ``C`` the V-cycle on ``h``."""
    return lambda v: vcycle_apply(h, B.matvec(v))


def _true_residual(B, x):
    nrm = np.linalg.norm(x)
    if nrm == 0.0:
        raise KrylovBreakdown("iterate collapsed to zero")
    return float(np.linalg.norm(B.matvec(x / nrm)))


def pgmres_solve(h, B, x0, p=KrylovParams()):
    """Full GMRES on ``C B x = 0`` started from ``x0``.

    Minimises ``||C B x||`` over ``x0 + K_m(CB, C B x0)`` and stops once the
    normalised iterate satisfies ``||B x|| <= tol``.
    """
    op = preconditioned_operator(h, B)
    x0 = np.asarray(x0, dtype=np.float64)
    n = x0.shape[0]
    res0 = _true_residual(B, x0)
    r0 = -op(x0)
    beta = float(np.linalg.norm(r0))
    history = [(0, beta, res0)]
    if res0 <= p.tol or beta == 0.0:
        return KrylovResult(normalize_state(x0), 0, res0 <= p.tol, history)
    m = min(p.max_iters, n)
    V = np.zeros((n, m + 1))
    H = np.zeros((m + 1, m))
    cs, sn = np.zeros(m), np.zeros(m)
    g = np.zeros(m + 1)
    g[0] = beta
    V[:, 0] = r0 / beta
    x = x0
    for j in range(m):
        w = op(V[:, j])
        for _ in range(2):
            c = V[:, : j + 1].T @ w
            w -= V[:, : j + 1] @ c
            H[: j + 1, j] += c
        H[j + 1, j] = np.linalg.norm(w)
        breakdown = H[j + 1, j] <= 1e-14 * beta
        if not breakdown:
            V[:, j + 1] = w / H[j + 1, j]
        for i in range(j):
            a, b = H[i, j], H[i + 1, j]
            H[i, j], H[i + 1, j] = cs[i] * a + sn[i] * b, -sn[i] * a + cs[i] * b
        den = np.hypot(H[j, j], H[j + 1, j])
        cs[j], sn[j] = H[j, j] / den, H[j + 1, j] / den
        H[j, j], H[j + 1, j] = den, 0.0
        g[j + 1] = -sn[j] * g[j]
        g[j] = cs[j] * g[j]
        y = np.linalg.solve(np.triu(H[: j + 1, : j + 1]), g[: j + 1])
        x = x0 + V[:, : j + 1] @ y
        res = _true_residual(B, x)
        history.append((j + 1, abs(g[j + 1]), res))
        log.debug("pGMRES %d: precond %.3e true %.3e", j + 1, abs(g[j + 1]), res)
        if res <= p.tol or breakdown:
            return KrylovResult(normalize_state(x), j + 1, res <= p.tol, history)
    return KrylovResult(normalize_state(x), m, False, history)


def parnoldi_solve(h, B, y, p=KrylovParams()):
    """Arnoldi on ``C B`` from ``y``; the Ritz vector for the Ritz value nearest 0 is the iterate."""
    op = preconditioned_operator(h, B)
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    res0 = _true_residual(B, y)
    history = [(0, float("nan"), res0)]
    if res0 <= p.tol:
        return KrylovResult(normalize_state(y), 0, True, history)
    m = min(p.max_iters, n)
    V = np.zeros((n, m + 1))
    H = np.zeros((m + 1, m))
    V[:, 0] = y / np.linalg.norm(y)
    ritz = []
    x = y
    for k in range(m):
        w = op(V[:, k])
        for _ in range(2):
            c = V[:, : k + 1].T @ w
            w -= V[:, : k + 1] @ c
            H[: k + 1, k] += c
        H[k + 1, k] = np.linalg.norm(w)
        breakdown = H[k + 1, k] <= 1e-14 * max(1.0, abs(H[: k + 1, k]).max())
        if not breakdown:
            V[:, k + 1] = w / H[k + 1, k]
        theta, eta = np.linalg.eig(H[: k + 1, : k + 1])
        t = int(np.argmin(np.abs(theta)))
        ritz.append(complex(theta[t]))
        e = eta[:, t]
        e = np.real(e * np.exp(-1j * np.angle(e[np.argmax(np.abs(e))])))
        x = V[:, : k + 1] @ e
        res = _true_residual(B, x)
        # Arnoldi residual of the Ritz pair: |h_{k+1,k}| |e_k^t eta|
        history.append((k + 1, abs(H[k + 1, k] * e[-1]) / np.linalg.norm(e), res))
        if res <= p.tol or breakdown:
            return KrylovResult(normalize_state(x), k + 1, res <= p.tol, history, ritz)
    return KrylovResult(normalize_state(x), m, False, history, ritz)


def power_iterate(A, x0, max_iters=1000, tol=None):
    """``x <- A x / ||A x||``; returns ``(x, residual history)``.

    Residuals are ``||(I - A) x||`` of the normalised iterate.  With ``tol``
    the loop stops at the first residual below it.
    """
    x = np.asarray(x0, dtype=np.float64) / np.linalg.norm(x0)
    hist = []
    for _ in range(max_iters):
        x = A.matvec(x)
        x /= np.linalg.norm(x)
        hist.append(float(np.linalg.norm(x - A.matvec(x))))
        if tol is not None and hist[-1] <= tol:
            break
    return x, hist


def tau_richardson(B, x0, tau=0.7, max_iters=1000, tol=None):
    """``x <- (I - tau B) x`` (normalised); returns ``(x, residual history)``."""
    x = np.asarray(x0, dtype=np.float64) / np.linalg.norm(x0)
    hist = []
    for _ in range(max_iters):
        x = x - tau * B.matvec(x)
        x /= np.linalg.norm(x)
        hist.append(float(np.linalg.norm(B.matvec(x))))
        if tol is not None and hist[-1] <= tol:
            break
    return x, hist
