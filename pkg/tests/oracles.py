"""Independent reference computations used by the tests.

Nothing here imports the package's solver internals: losses are written out
directly (Cox by an O(n^2) risk-set matrix), small problems are solved by
enumerating sign patterns, and the square-root lasso goes through cvxpy.
"""

from __future__ import annotations

import itertools

import mpmath
import numpy as np
from scipy import optimize


def loss_and_grad_eta(family: str, y, eta, event=None):
    """Sum-form negative log-likelihood and its derivative in eta."""
    y = np.asarray(y, dtype=float)
    if family == "gaussian":
        r = y - eta
        return 0.5 * r @ r, -r
    if family == "logistic":
        mu = 1.0 / (1.0 + np.exp(-eta))
        return float(np.sum(np.logaddexp(0.0, eta) - y * eta)), mu - y
    if family == "poisson":
        mu = np.exp(eta)
        return float(np.sum(mu - y * eta)), mu - y
    if family == "cox":
        d = np.asarray(event, dtype=float)
        # R[k, i] = 1 when subject i is still at risk at time t_k
        R = (y[None, :] >= y[:, None]).astype(float)
        w = np.exp(eta)
        S = R @ w
        loss = -float(np.sum(d * (eta - np.log(S))))
        grad = -d + w * (R.T @ (d / S))
        return loss, grad
    raise ValueError(family)


def brute_force_lasso(X, y, family: str, lam: float, event=None):
    """Minimal penalized objective over every sign pattern of beta.

    Within a fixed orthant the penalty is linear, so each pattern is a smooth
    bound-constrained problem.  Returns ``(objective, intercept, beta)``.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    icpt = family != "cox"
    best = (np.inf, 0.0, np.zeros(p))
    for signs in itertools.product((-1, 0, 1), repeat=p):
        s = np.array(signs, dtype=float)
        free = np.flatnonzero(s)
        m = len(free) + int(icpt)
        if m == 0:
            val = loss_and_grad_eta(family, y, np.zeros(n), event)[0]
            if val < best[0]:
                best = (val, 0.0, np.zeros(p))
            continue

        def fun(theta):
            b0 = theta[0] if icpt else 0.0
            beta = theta[int(icpt):]
            eta = b0 + X[:, free] @ beta
            val, g = loss_and_grad_eta(family, y, eta, event)
            grad = X[:, free].T @ g + lam * s[free]
            if icpt:
                grad = np.concatenate([[g.sum()], grad])
            return val + lam * s[free] @ beta, grad

        bounds = ([(None, None)] if icpt else []) + [(0, None) if v > 0 else (None, 0) for v in s[free]]
        x0 = np.zeros(m)
        res = optimize.minimize(
            fun, x0, jac=True, method="L-BFGS-B", bounds=bounds,
            options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 10_000},
        )
        if res.fun < best[0]:
            beta = np.zeros(p)
            beta[free] = res.x[int(icpt):]
            best = (float(res.fun), float(res.x[0]) if icpt else 0.0, beta)
    return best


def sqrt_lasso_cvx(X, y, lam: float):
    """Direct minimization of ``||y - b0 - X beta||_2 + lam * ||beta||_1``."""
    import cvxpy as cp

    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    beta = cp.Variable(X.shape[1])
    b0 = cp.Variable()
    obj = cp.norm(y - b0 - X @ beta, 2) + lam * cp.norm(beta, 1)
    prob = cp.Problem(cp.Minimize(obj))
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)
    return float(prob.value), float(b0.value), np.asarray(beta.value)


def sqrt_lasso_objective(X, y, b0, beta, lam):
    r = y - b0 - X @ beta
    return float(np.linalg.norm(r) + lam * np.abs(beta).sum())


def fp_to_lambda_mp(fp, p, dps=50) -> float:
    """Root of ``2 p (1 - Phi(lam)) = fp`` in high precision."""
    with mpmath.workdps(dps):
        # Phi(lam) = 1 - fp / (2p)  <=>  erf(lam / sqrt 2) = 1 - fp / p
        return float(mpmath.sqrt(2) * mpmath.erfinv(1 - mpmath.mpf(fp) / p))


def central_difference(f, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def skew_sq_grid(x, n_grid=20001):
    """Best squared skewness of ``log(x + c)`` over a dense log grid of offsets."""
    x = np.asarray(x, dtype=float)
    lo, rng = x.min(), np.ptp(x)
    best = np.inf
    for off in rng * np.logspace(-6, 6, n_grid):
        z = np.log(x - lo + off)
        d = z - z.mean()
        s = np.mean(d**3) / np.mean(d**2) ** 1.5
        best = min(best, s * s)
    return best
