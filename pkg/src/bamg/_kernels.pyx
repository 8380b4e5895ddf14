# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: CSR products, Jacobi sweeps and the greedy
least-squares interpolation fit.

Every routine here has a numpy twin in :mod:`bamg._fallback` with the same
signature; :mod:`bamg.kernels` picks one at import time.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

ctypedef cnp.intp_t idx_t


def csr_matvec(const idx_t[::1] indptr, const idx_t[::1] indices,
               const double[::1] data, const double[::1] x):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t i, k
    cdef double acc
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] y = out
    for i in range(n):
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            acc += data[k] * x[indices[k]]
        y[i] = acc
    return out


def jacobi(const idx_t[::1] indptr, const idx_t[::1] indices,
           const double[::1] data, const double[::1] scaled_inv_diag,
           const double[::1] x0, const double[::1] b, int sweeps):
    """x <- x + w D^{-1} (b - M x), repeated; rows with zero scale are frozen."""
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t i, k
    cdef int s
    cdef double acc
    out = np.array(x0, dtype=np.float64, copy=True)
    cdef double[::1] x = out
    cdef double[::1] r = np.empty(n, dtype=np.float64)
    for s in range(sweeps):
        for i in range(n):
            acc = b[i]
            for k in range(indptr[i], indptr[i + 1]):
                acc -= data[k] * x[indices[k]]
            r[i] = acc
        for i in range(n):
            x[i] += scaled_inv_diag[i] * r[i]
    return out


cdef double _dot(double[:, ::1] a, Py_ssize_t ia, double[:, ::1] b,
                 Py_ssize_t ib, Py_ssize_t K) nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t k
    for k in range(K):
        acc += a[ia, k] * b[ib, k]
    return acc


def ls_greedy(const double[:, ::1] X, const double[::1] w,
              const idx_t[::1] fpts, const idx_t[::1] nb_ptr,
              const idx_t[::1] nb_idx, int caliber, double dep_tol):
    """Greedy weighted least-squares selection of interpolatory points.

    ``X`` holds one row per grid point and one column per test vector.
    For fine point ``fpts[r]`` the candidates are
    ``nb_idx[nb_ptr[r]:nb_ptr[r+1]]`` (ascending).  Columns are
    orthogonalised incrementally (modified Gram-Schmidt, two passes), so the
    fit value of each trial set is the squared norm of an explicit residual.

    Returns ``(sel, coef, nsel, lsteps, deficient)``.
    """
    cdef Py_ssize_t nf = fpts.shape[0]
    cdef Py_ssize_t K = X.shape[1]
    cdef Py_ssize_t r, t, m, k, j, q, best_pos, g, p, i
    cdef Py_ssize_t nstart, nend
    cdef double best_L, L, proj, nrm, nrm0, coef_acc, acc_q

    sel_arr = np.full((nf, caliber), -1, dtype=np.intp)
    coef_arr = np.zeros((nf, caliber), dtype=np.float64)
    nsel_arr = np.zeros(nf, dtype=np.intp)
    lsteps_arr = np.full((nf, caliber + 1), np.nan, dtype=np.float64)
    def_arr = np.zeros(nf, dtype=np.uint8)
    cdef idx_t[:, ::1] sel = sel_arr
    cdef double[:, ::1] coef = coef_arr
    cdef idx_t[::1] nsel = nsel_arr
    cdef double[:, ::1] lsteps = lsteps_arr
    cdef cnp.uint8_t[::1] deficient = def_arr

    cdef double[::1] sw = np.sqrt(np.asarray(w, dtype=np.float64))
    # rows 1..caliber hold the orthonormal basis of the chosen columns
    cdef double[:, ::1] Qb = np.zeros((caliber + 1, K), dtype=np.float64)
    cdef double[:, ::1] res = np.zeros((1, K), dtype=np.float64)
    cdef double[:, ::1] trial = np.zeros((1, K), dtype=np.float64)
    cdef double[:, ::1] best_q = np.zeros((1, K), dtype=np.float64)
    cdef double[:, ::1] R = np.zeros((caliber, caliber), dtype=np.float64)
    cdef double[::1] rcol = np.zeros(caliber, dtype=np.float64)
    cdef double[::1] best_rcol = np.zeros(caliber, dtype=np.float64)
    cdef double[::1] qty = np.zeros(caliber, dtype=np.float64)
    cdef cnp.uint8_t[::1] used = np.zeros(nb_idx.shape[0] + 1, dtype=np.uint8)
    cdef bint best_dep, dep, any_dep

    for r in range(nf):
        i = fpts[r]
        nstart = nb_ptr[r]
        nend = nb_ptr[r + 1]
        for k in range(K):
            res[0, k] = sw[k] * X[i, k]
        L = 0.0
        for k in range(K):
            L += res[0, k] * res[0, k]
        lsteps[r, 0] = L
        for t in range(nstart, nend):
            used[t] = 0
        m = 0
        any_dep = False
        while m < caliber and m < nend - nstart:
            best_pos = -1
            best_L = 0.0
            best_dep = False
            for t in range(nstart, nend):
                if used[t]:
                    continue
                g = nb_idx[t]
                for k in range(K):
                    trial[0, k] = sw[k] * X[g, k]
                nrm0 = sqrt(_dot(trial, 0, trial, 0, K))
                for j in range(m):
                    rcol[j] = 0.0
                for p in range(2):
                    for j in range(m):
                        proj = _dot(Qb, j + 1, trial, 0, K)
                        rcol[j] += proj
                        for k in range(K):
                            trial[0, k] -= proj * Qb[j + 1, k]
                nrm = sqrt(_dot(trial, 0, trial, 0, K))
                dep = nrm <= dep_tol * nrm0 or nrm0 == 0.0
                if dep:
                    L = _dot(res, 0, res, 0, K)
                else:
                    for k in range(K):
                        trial[0, k] /= nrm
                    proj = _dot(trial, 0, res, 0, K)
                    L = 0.0
                    for k in range(K):
                        L += (res[0, k] - proj * trial[0, k]) ** 2
                if best_pos < 0 or L < best_L:
                    best_pos = t
                    best_L = L
                    best_dep = dep
                    for k in range(K):
                        best_q[0, k] = trial[0, k]
                    for j in range(m):
                        best_rcol[j] = rcol[j]
                    if not dep:
                        best_rcol[m] = nrm
            used[best_pos] = 1
            sel[r, m] = nb_idx[best_pos]
            if best_dep:
                any_dep = True
                for k in range(K):
                    Qb[m + 1, k] = 0.0
                for j in range(m + 1):
                    R[j, m] = 0.0
            else:
                for k in range(K):
                    Qb[m + 1, k] = best_q[0, k]
                for j in range(m + 1):
                    R[j, m] = best_rcol[j]
                for j in range(m + 1, caliber):
                    R[j, m] = 0.0
                proj = _dot(Qb, m + 1, res, 0, K)
                for k in range(K):
                    res[0, k] -= proj * Qb[m + 1, k]
            m += 1
            lsteps[r, m] = best_L
        nsel[r] = m
        if any_dep:
            deficient[r] = 1
            continue
        # back substitution R p = Q^t y
        for j in range(m):
            acc_q = 0.0
            for k in range(K):
                acc_q += Qb[j + 1, k] * sw[k] * X[i, k]
            qty[j] = acc_q
        for j in range(m - 1, -1, -1):
            coef_acc = qty[j]
            for q in range(j + 1, m):
                coef_acc -= R[j, q] * coef[r, q]
            coef[r, j] = coef_acc / R[j, j]
    return sel_arr, coef_arr, nsel_arr, lsteps_arr, def_arr
