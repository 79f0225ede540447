"""Compiled inner loop: weighted least-squares lasso by coordinate descent.

Minimizes ``0.5 * sum(w * (z - b - X @ beta)**2) + lam * ||beta||_1`` over the
columns listed in ``candidates`` (others stay fixed).  ``X`` should be
Fortran-ordered so that column access is contiguous.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def weighted_col_norms(X, w):
    n, p = X.shape
    out = np.empty(p)
    for j in range(p):
        s = 0.0
        for i in range(n):
            s += w[i] * X[i, j] * X[i, j]
        out[j] = s
    return out


@njit(cache=True)
def cd_solve(X, z, w, xwx, beta, icpt, lam, fit_intercept, candidates, tol, max_sweeps):
    """Run sweeps in place on ``beta``; returns (intercept, sweeps).

    Sweeps alternate a full pass over ``candidates`` with passes restricted to
    the current non-zeros, finishing on a full pass with no change above
    ``tol``.  A negative sweep count signals that ``max_sweeps`` ran out.
    """
    n, p = X.shape
    r = z - icpt
    for j in range(p):
        bj = beta[j]
        if bj != 0.0:
            for i in range(n):
                r[i] -= X[i, j] * bj
    wsum = 0.0
    for i in range(n):
        wsum += w[i]

    sweeps = 0
    full = True
    while sweeps < max_sweeps:
        dmax = 0.0
        if fit_intercept:
            s = 0.0
            for i in range(n):
                s += w[i] * r[i]
            d = s / wsum
            if d != 0.0:
                icpt += d
                for i in range(n):
                    r[i] -= d
                if abs(d) > dmax:
                    dmax = abs(d)
        for jj in range(candidates.shape[0]):
            j = candidates[jj]
            old = beta[j]
            if not full and old == 0.0:
                continue
            nj = xwx[j]
            if nj <= 0.0:
                continue
            g = 0.0
            for i in range(n):
                g += w[i] * X[i, j] * r[i]
            u = g + nj * old
            if u > lam:
                new = (u - lam) / nj
            elif u < -lam:
                new = (u + lam) / nj
            else:
                new = 0.0
            if new != old:
                d = new - old
                for i in range(n):
                    r[i] -= d * X[i, j]
                beta[j] = new
                if abs(d) > dmax:
                    dmax = abs(d)
        sweeps += 1
        if full:
            if dmax < tol:
                return icpt, sweeps
            full = False
        elif dmax < tol:
            full = True
    return icpt, -sweeps


@njit(cache=True)
def cd_gram(Q, q, x, lam, penalized, tol, max_sweeps):
    """Minimize ``0.5 x'Qx - q'x + lam * sum_{penalized} |x_j|`` in place.

    Same sweep schedule and return convention as :func:`cd_solve`.
    """
    m = x.shape[0]
    r = q.copy()
    for j in range(m):
        xj = x[j]
        if xj != 0.0:
            for i in range(m):
                r[i] -= Q[i, j] * xj
    sweeps = 0
    full = True
    while sweeps < max_sweeps:
        dmax = 0.0
        for j in range(m):
            old = x[j]
            pen = penalized[j]
            if pen and not full and old == 0.0:
                continue
            qjj = Q[j, j]
            if qjj <= 0.0:
                continue
            u = r[j] + qjj * old
            if not pen:
                new = u / qjj
            elif u > lam:
                new = (u - lam) / qjj
            elif u < -lam:
                new = (u + lam) / qjj
            else:
                new = 0.0
            if new != old:
                d = new - old
                for i in range(m):
                    r[i] -= Q[i, j] * d
                x[j] = new
                if abs(d) > dmax:
                    dmax = abs(d)
        sweeps += 1
        if full:
            if dmax < tol:
                return sweeps
            full = False
        elif dmax < tol:
            full = True
    return -sweeps
