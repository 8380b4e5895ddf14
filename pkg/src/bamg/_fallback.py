"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Same signatures and the same arithmetic order where it matters (the greedy
fit uses identical two-pass Gram-Schmidt), so both backends select the same
interpolatory points on non-degenerate data.
"""

import numpy as np


def csr_matvec(indptr, indices, data, x):
    n = indptr.shape[0] - 1
    rows = np.repeat(np.arange(n), np.diff(indptr))
    return np.bincount(rows, weights=data * x[indices], minlength=n).astype(np.float64)


def jacobi(indptr, indices, data, scaled_inv_diag, x0, b, sweeps):
    x = np.array(x0, dtype=np.float64, copy=True)
    for _ in range(sweeps):
        x += scaled_inv_diag * (b - csr_matvec(indptr, indices, data, x))
    return x


def ls_greedy(X, w, fpts, nb_ptr, nb_idx, caliber, dep_tol):
    nf = fpts.shape[0]
    K = X.shape[1]
    sel = np.full((nf, caliber), -1, dtype=np.intp)
    coef = np.zeros((nf, caliber))
    nsel = np.zeros(nf, dtype=np.intp)
    lsteps = np.full((nf, caliber + 1), np.nan)
    deficient = np.zeros(nf, dtype=np.uint8)
    sw = np.sqrt(np.asarray(w, dtype=np.float64))

    for r in range(nf):
        i = fpts[r]
        cands = list(nb_idx[nb_ptr[r]:nb_ptr[r + 1]])
        y = sw * X[i]
        res = y.copy()
        lsteps[r, 0] = float(res @ res)
        basis = []
        R = np.zeros((caliber, caliber))
        any_dep = False
        m = 0
        while m < caliber and cands:
            best = None
            for g in cands:
                v = sw * X[g]
                nrm0 = np.sqrt(v @ v)
                rcol = np.zeros(m)
                for _ in range(2):
                    for j, q in enumerate(basis):
                        proj = q @ v
                        rcol[j] += proj
                        v = v - proj * q
                nrm = np.sqrt(v @ v)
                dep = nrm0 == 0.0 or nrm <= dep_tol * nrm0
                if dep:
                    L = float(res @ res)
                else:
                    v = v / nrm
                    t = res - (v @ res) * v
                    L = float(t @ t)
                if best is None or L < best[0]:
                    best = (L, g, dep, v, rcol, nrm)
            L, g, dep, v, rcol, nrm = best
            cands.remove(g)
            sel[r, m] = g
            if dep:
                any_dep = True
                basis.append(np.zeros(K))
            else:
                basis.append(v)
                R[:m, m] = rcol
                R[m, m] = nrm
                res = res - (v @ res) * v
            m += 1
            lsteps[r, m] = L
        nsel[r] = m
        if any_dep:
            deficient[r] = 1
            continue
        qty = np.array([q @ y for q in basis])
        for j in range(m - 1, -1, -1):
            coef[r, j] = (qty[j] - R[j, j + 1:m] @ coef[r, j + 1:m]) / R[j, j]
    return sel, coef, nsel, lsteps, deficient
