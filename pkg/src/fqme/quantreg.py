"""Check-loss minimization for linear quantile regression.

The fit solves

    min_beta  sum_i w_i rho_tau(y_i - x_i' beta),
    rho_tau(e) = e (tau - 1[e < 0]),

as a linear program via a Mehrotra-style predictor-corrector interior-point
method on the bounded-dual form

    max_a y'a   s.t.  X'a = (1 - tau) X'w,  0 <= a <= w,

whose multiplier for the equality constraint is the coefficient vector.  Each
iteration reduces to a single p x p normal-equations solve, so tall, thin
designs (n up to ~1e4, p up to ~30) fit in milliseconds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, qr


class SingularDesign(ValueError):
    """Design matrix is rank deficient; ``columns`` names the offenders."""

    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"design matrix is rank deficient; offending columns: {self.columns}")


@dataclass(frozen=True)
class QuantileFit:
    """Solution of one check-loss minimization.

    Fields
    ------
    tau : float
    coefficients : ndarray (p,), ordered as the design columns
    objective : float, attained (weighted) check loss
    iterations : int
    status : str, "Optimal" or "MaxIter"
    """

    tau: float
    coefficients: np.ndarray
    objective: float
    iterations: int
    status: str


def check_loss(residuals: np.ndarray, tau: float) -> float:
    """Sum of check losses ``sum_i r_i (tau - 1[r_i < 0])``."""
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    r = np.asarray(residuals, dtype=float)
    return float(np.sum(r * (tau - (r < 0))))


def _weighted_loss(r, tau, w):
    return float(np.sum(w * r * (tau - (r < 0))))


def _rank_check(x):
    """Raise SingularDesign naming the dependent columns, if any."""
    n, p = x.shape
    _, r, piv = qr(x, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = max(n, p) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    if rank < p:
        raise SingularDesign(sorted(int(c) for c in piv[rank:]))


def fit_quantile(
    X: np.ndarray,
    y: np.ndarray,
    tau: float,
    weights: np.ndarray | None = None,
    tol: float = 1e-8,
    max_iter: int = 100,
) -> QuantileFit:
    """Minimize the (weighted) check loss over a dense design.

    Arguments
    ---------
    X : ndarray (n, p)
        Design matrix, intercept column included by the caller.
    y : ndarray (n,)
        Response.
    tau : float
        Quantile level in (0, 1).
    weights : ndarray (n,), optional
        Non-negative per-row multipliers of the check loss; default all ones.
        Zero-weight rows are dropped before solving.
    tol : float
        Relative duality-gap tolerance certifying the attained objective.
    max_iter : int
        Iteration cap; on hitting it the best iterate is returned with
        status "MaxIter".

    Returns
    -------
    QuantileFit
        When the minimizer is non-unique, any optimal vertex/face point may be
        returned; only the objective is pinned.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.size:
        raise ValueError(f"shape mismatch: X {X.shape}, y {y.shape}")
    n, p = X.shape
    if weights is None:
        w_full = np.ones(n)
    else:
        w_full = np.asarray(weights, dtype=float)
        if w_full.shape != (n,):
            raise ValueError(f"weights shape {w_full.shape} does not match n={n}")
        if np.any(w_full < 0):
            raise ValueError("weights must be non-negative")

    keep = w_full > 0
    Xa, ya, w = X[keep], y[keep], w_full[keep]
    na = Xa.shape[0]
    if na < p:
        raise SingularDesign(list(range(p)))
    _rank_check(Xa)

    beta, iters, status = _mehrotra(Xa, ya, tau, w, tol, max_iter)
    resid = y - X @ beta
    objective = _weighted_loss(resid, tau, w_full)
    return QuantileFit(tau=tau, coefficients=beta, objective=objective, iterations=iters, status=status)


def _mehrotra(X, y, tau, w, tol, max_iter):
    n, p = X.shape
    yscale = 1.0 + float(np.abs(y).max(initial=0.0))

    # starting point: dual variable centered in its box, beta from weighted LS
    a = (1.0 - tau) * w
    s = w - a
    gram = X.T @ (w[:, None] * X)
    try:
        c, low = cho_factor(gram, check_finite=False)
        beta = cho_solve((c, low), X.T @ (w * y), check_finite=False)
    except np.linalg.LinAlgError:
        beta = np.linalg.lstsq(X, y, rcond=None)[0]
    r = y - X @ beta
    eps0 = max(1e-5 * yscale, 1e-10)
    z = np.maximum(-r, eps0)
    q = np.maximum(r, eps0)
    b = (1.0 - tau) * (X.T @ w)

    best = (np.inf, beta.copy(), 0)
    status = "MaxIter"
    it = 0
    for it in range(1, max_iter + 1):
        r = y - X @ beta
        obj = _weighted_loss(r, tau, w)
        if obj < best[0]:
            best = (obj, beta.copy(), it)

        # Lagrangian value of the box-feasible iterate; the rb term vanishes
        # geometrically, and the stopping rule bounds it separately
        rb = b - X.T @ a
        dual = float(y @ a - (1.0 - tau) * (w @ y) + rb @ beta)
        gap = obj - dual
        mu = (z @ a + q @ s) / (2.0 * n)
        if (abs(gap) <= tol * (1.0 + abs(obj)) and np.abs(rb).max(initial=0.0) <= tol * (1.0 + np.abs(b).max(initial=0.0))) or mu <= tol * 1e-2 * yscale:
            status = "Optimal"
            best = (obj, beta.copy(), it) if obj <= best[0] else best
            break

        za = z / a
        qs = q / s
        d = 1.0 / (za + qs)
        xd = X * d[:, None]
        m = X.T @ xd
        rhs_aff = xd.T @ r - rb

        try:
            c, low = cho_factor(m, check_finite=False)
        except np.linalg.LinAlgError:
            m_reg = m + (1e-12 * np.trace(m) / p + 1e-300) * np.eye(p)
            c, low = cho_factor(m_reg, check_finite=False)

        dbeta_aff = cho_solve((c, low), rhs_aff, check_finite=False)
        da_aff = d * (r - X @ dbeta_aff)
        dz_aff = -z - za * da_aff
        dq_aff = -q + qs * da_aff

        ap_aff = _step_length(a, da_aff, s, -da_aff)
        ad_aff = _step_length(z, dz_aff, q, dq_aff)
        mu_aff = (
            (z + ad_aff * dz_aff) @ (a + ap_aff * da_aff)
            + (q + ad_aff * dq_aff) @ (s - ap_aff * da_aff)
        ) / (2.0 * n)
        sigma = (max(mu_aff, 0.0) / mu) ** 3 if mu > 0 else 0.0

        g = (sigma * mu - da_aff * dz_aff) / a - (sigma * mu + da_aff * dq_aff) / s
        dbeta = cho_solve((c, low), xd.T @ (r + g) - rb, check_finite=False)
        da = d * (r + g - X @ dbeta)
        dz = -z + (sigma * mu - da_aff * dz_aff) / a - za * da
        dq = -q + (sigma * mu + da_aff * dq_aff) / s + qs * da

        ap = 0.9995 * _step_length(a, da, s, -da)
        ad = 0.9995 * _step_length(z, dz, q, dq)
        a = a + ap * da
        s = s - ap * da
        z = z + ad * dz
        q = q + ad * dq
        beta = beta + ad * dbeta

        floor = 1e-14 * max(1.0, w.max())
        a = np.maximum(a, floor)
        s = np.maximum(s, floor)
        z = np.maximum(z, floor)
        q = np.maximum(q, floor)

    return best[1], it, status


def _step_length(u, du, v, dv):
    """Largest alpha <= 1 keeping u + alpha du > 0 and v + alpha dv > 0."""
    alpha = 1.0
    neg = du < 0
    if np.any(neg):
        alpha = min(alpha, float(np.min(-u[neg] / du[neg])))
    neg = dv < 0
    if np.any(neg):
        alpha = min(alpha, float(np.min(-v[neg] / dv[neg])))
    return alpha
