"""Design assembly and basis-dimension selection for functional quantile fits.

Internal module: every estimator reduces to "curves + scalars -> quantile
fit" and this is the single implementation of that reduction.  Columns are
ordered (intercept, basis coefficients, scalar, covariates) so downstream
code can slice coefficient vectors positionally.
"""

from __future__ import annotations

import numpy as np

from .basis import SplineBasis, basis_for_dimension, bic_score, project, reconstruct_beta
from .quantreg import QuantileFit, fit_quantile
from .results import EstimateSet

K_CANDIDATES = tuple(range(4, 16))


def assemble_design(curves, basis: SplineBasis, x2, Z) -> np.ndarray:
    """Stack [1, curve projections, x2, Z] into an n x (K+2+P) design."""
    curves = np.asarray(curves, dtype=float)
    coefs = project(curves, basis)
    n = coefs.shape[0]
    cols = [np.ones((n, 1)), coefs, np.asarray(x2, float).reshape(n, 1)]
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z.reshape(n, 1)
    if Z.size:
        cols.append(Z)
    return np.hstack(cols)


def select_dimension(curves, x2, Z, y, tau, grid, candidates=K_CANDIDATES, weights=None, degree=3):
    """Pick the basis dimension minimising BIC over ``candidates``.

    Returns (K, basis, fit) for the winner.  Ties go to the smaller K
    because candidates are scanned in ascending order and only a strict
    improvement replaces the incumbent.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    best = None
    for K in sorted(candidates):
        basis = basis_for_dimension(K, grid, degree=degree)
        X = assemble_design(curves, basis, x2, Z)
        fit = fit_quantile(X, y, tau, weights=weights)
        bic = bic_score(fit.objective, n, X.shape[1])
        if best is None or bic < best[0] - 1e-12:
            best = (bic, K, basis, fit)
    return best[1], best[2], best[3]


def fit_functional_quantile(
    curves,
    x2,
    Z,
    y,
    tau,
    grid,
    method,
    K=None,
    candidates=K_CANDIDATES,
    weights=None,
    degree=3,
) -> EstimateSet:
    """Fit the scalar-on-function quantile model for pre-built predictor curves.

    ``K=None`` selects the dimension by BIC; an explicit ``K`` skips the scan
    (bootstrap replicates reuse the point fit's dimension this way).
    """
    grid = np.asarray(grid, dtype=float)
    if K is None:
        K, basis, fit = select_dimension(
            curves, x2, Z, y, tau, grid, candidates=candidates, weights=weights, degree=degree
        )
    else:
        basis = basis_for_dimension(K, grid, degree=degree)
        X = assemble_design(curves, basis, x2, Z)
        fit = fit_quantile(X, y, tau, weights=weights)
    return estimate_from_fit(fit, basis, tau, method, grid)


def estimate_from_fit(fit: QuantileFit, basis: SplineBasis, tau, method, grid) -> EstimateSet:
    """Unpack a coefficient vector (beta0, omega, beta2, gammas) into an EstimateSet."""
    coefs = fit.coefficients
    K = basis.K
    omega = coefs[1 : 1 + K]
    return EstimateSet(
        method=method,
        tau=float(tau),
        beta0=float(coefs[0]),
        beta1_curve=reconstruct_beta(omega, basis),
        beta2=float(coefs[1 + K]),
        gammas=coefs[2 + K :].copy(),
        selected_K=K,
        omega=omega.copy(),
        grid=np.asarray(grid, dtype=float),
    )
