"""Dense spectra, fields of values and C/F multiplicity dumps."""

from __future__ import annotations

import io

import numpy as np

from .krylov import vcycle_apply

DENSE_LIMIT = 1200
OPERATORS = ("A", "richardson", "mg", "cb")


class DenseLimitError(ValueError):
    pass


def _check_size(n, limit):
    if n > limit:
        raise DenseLimitError(f"dense diagnostics need n <= {limit}, got {n}")


def preconditioned_dense(h, B, limit=DENSE_LIMIT):
    """Dense ``C B``, one V-cycle per column of ``B``."""
    _check_size(B.nrows, limit)
    Bd = B.to_dense()
    return np.column_stack([vcycle_apply(h, Bd[:, j]) for j in range(B.ncols)])


def dense_operator(kind, B, h=None, tau=0.7, limit=DENSE_LIMIT):
    """Dense iteration operator.

    ``"A"`` is ``I - B``, ``"richardson"`` is ``I - tau B``, ``"cb"`` is
    ``C B`` and ``"mg"`` its complement ``I - C B``.
    """
    _check_size(B.nrows, limit)
    n = B.nrows
    if kind == "A":
        return np.eye(n) - B.to_dense()
    if kind == "richardson":
        return np.eye(n) - tau * B.to_dense()
    if kind in ("mg", "cb"):
        if h is None:
            raise ValueError(f"operator '{kind}' needs a hierarchy")
        CB = preconditioned_dense(h, B, limit)
        return CB if kind == "cb" else np.eye(n) - CB
    raise ValueError(f"unknown operator '{kind}', expected one of {OPERATORS}")


def spectrum(M):
    """All eigenvalues, ordered by real part then imaginary part."""
    w = np.linalg.eigvals(np.asarray(M))
    return w[np.lexsort((w.imag, w.real))]


def field_of_values(M, m=64):
    """Boundary points of the field of values by the rotation method.

    For each angle ``2 pi j / m`` the top eigenvector ``v`` of the Hermitian
    part of ``exp(i theta) M`` gives the boundary point ``v* M v``.
    """
    M = np.asarray(M, dtype=np.complex128)
    if m < 1:
        raise ValueError("need at least one angle")
    pts = np.empty(m, dtype=np.complex128)
    for j in range(m):
        R = np.exp(2j * np.pi * j / m) * M
        _, V = np.linalg.eigh(0.5 * (R + R.conj().T))
        v = V[:, -1]
        pts[j] = v.conj() @ M @ v
    return pts


def complex_csv(series):
    """``label,index,real,imag`` rows for a ``{label: values}`` mapping."""
    buf = io.StringIO()
    buf.write("label,index,real,imag\n")
    for label, values in series.items():
        for i, z in enumerate(np.asarray(values, dtype=np.complex128)):
            buf.write(f"{label},{i},{z.real:.17g},{z.imag:.17g}\n")
    return buf.getvalue()


def level_multiplicity(h):
    """Number of levels each finest-level point lives on (1 = fine only)."""
    n = h.levels[0].n
    mult = np.ones(n, dtype=np.intp)
    alive = np.arange(n)  # finest index of each point on the current level
    for lvl in h.levels[:-1]:
        alive = alive[lvl.part.cset]
        mult[alive] += 1
    return mult


def multiplicity_csv(h, points=None):
    """``point,[x,y,]levels,level0`` with ``level0`` the finest C/F label."""
    mult = level_multiplicity(h)
    part = h.levels[0].part
    coarse = part.is_coarse() if part is not None else np.zeros(mult.size, dtype=bool)
    buf = io.StringIO()
    buf.write("point,x,y,levels,level0\n" if points is not None else "point,levels,level0\n")
    for i, m in enumerate(mult):
        cf = "C" if coarse[i] else "F"
        xy = f"{points[i, 0]:.17g},{points[i, 1]:.17g}," if points is not None else ""
        buf.write(f"{i},{xy}{m},{cf}\n")
    return buf.getvalue()
