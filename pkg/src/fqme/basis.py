"""B-spline bases on [0,1], curve projection, and BIC dimension selection.

A functional coefficient beta1(t) is represented as sum_k omega_k b_k(t) in a
clamped B-spline basis with equally spaced interior knots.  Observed curves
enter the regression through their quadrature projections onto the same basis,
so the functional term reduces to an inner product of coefficient vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline

from . import quantreg


@dataclass(frozen=True)
class SplineBasis:
    """Immutable basis-evaluation table on a fixed grid.

    Fields
    ------
    degree : int
    interior_knots : ndarray, sorted reals in (0, 1)
    K : int, basis dimension (= len(interior_knots) + degree + 1)
    grid : ndarray, sorted observation points in [0, 1]
    B : ndarray (len(grid), K), basis evaluations
    """

    degree: int
    interior_knots: np.ndarray
    K: int
    grid: np.ndarray
    B: np.ndarray

    @property
    def quad_weights(self) -> np.ndarray:
        """Trapezoid quadrature weights on the grid."""
        return _trapezoid_weights(self.grid)


def _trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    g = np.asarray(grid, dtype=float)
    if g.size == 1:
        return np.ones(1)
    w = np.zeros_like(g)
    d = np.diff(g)
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    return w


def make_basis(degree: int, n_interior: int, grid) -> SplineBasis:
    """Build a clamped B-spline basis with equally spaced interior knots.

    The knot vector repeats 0 and 1 ``degree + 1`` times at each end, i.e. the
    basis spans polynomials of the given degree on [0,1] and satisfies the
    partition of unity on the whole interval.
    """
    if degree < 0:
        raise ValueError(f"degree must be >= 0, got {degree}")
    if n_interior < 0:
        raise ValueError(f"n_interior must be >= 0, got {n_interior}")
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("grid must be a 1-d array with at least two points")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    if grid[0] < 0.0 or grid[-1] > 1.0:
        raise ValueError(f"grid must lie inside [0, 1], got range [{grid[0]}, {grid[-1]}]")

    interior = np.linspace(0.0, 1.0, n_interior + 2)[1:-1]
    knots = np.r_[np.zeros(degree + 1), interior, np.ones(degree + 1)]
    # design_matrix rejects x == right endpoint unless extrapolation is allowed;
    # clip the final point into the last interval instead.
    x = np.minimum(grid, 1.0 - 1e-12) if grid[-1] >= 1.0 else grid
    b = BSpline.design_matrix(x, knots, degree).toarray()
    k = n_interior + degree + 1
    return SplineBasis(degree=degree, interior_knots=interior, K=k, grid=grid, B=b)


def basis_for_dimension(K: int, grid, degree: int = 3) -> SplineBasis:
    """Basis of dimension ``K`` (so ``K - degree - 1`` interior knots)."""
    n_interior = K - degree - 1
    if n_interior < 0:
        raise ValueError(f"K={K} is below the minimum {degree + 1} for degree {degree}")
    return make_basis(degree, n_interior, grid)


def project(curve: np.ndarray, basis: SplineBasis) -> np.ndarray:
    """Trapezoid quadrature of ``curve(t) * b_k(t)`` over the grid, per k.

    ``curve`` may be one curve of length ``len(grid)`` or a stack of curves
    with the grid on the last axis; projections are taken along that axis.
    """
    curve = np.asarray(curve, dtype=float)
    if curve.shape[-1] != basis.grid.size:
        raise ValueError(
            f"curve length {curve.shape[-1]} does not match grid length {basis.grid.size}"
        )
    return (curve * basis.quad_weights) @ basis.B


def reconstruct_beta(omega: np.ndarray, basis: SplineBasis) -> np.ndarray:
    """Pointwise curve ``B @ omega`` on the basis grid."""
    omega = np.asarray(omega, dtype=float)
    if omega.shape[-1] != basis.K:
        raise ValueError(f"omega length {omega.shape[-1]} does not match basis dimension {basis.K}")
    return omega @ basis.B.T


def bic_score(objective: float, n: int, p_total: int) -> float:
    """Check-loss BIC: ``2n ln(objective / n) + p_total ln(n)``.

    ``objective`` is the solver's attained sum of check losses.  A perfect fit
    is floored far below any attainable loss so it wins while ties still break
    toward the smaller dimension.
    """
    mean_loss = max(objective / n, 1e-300)
    return 2.0 * n * np.log(mean_loss) + p_total * np.log(n)


def select_K_bic(y: np.ndarray, designs: dict, tau: float, weights=None) -> int:
    """Pick the basis dimension minimizing the check-loss BIC.

    Arguments
    ---------
    y : ndarray (n,)
        Response.
    designs : mapping K -> ndarray (n, p_K)
        Full design matrix per candidate dimension (intercept, the K
        functional-projection columns, and any scalar covariates).
    tau : float
        Quantile level.
    weights : ndarray (n,), optional
        Per-row weights passed through to the solver.

    Returns
    -------
    int
        Candidate K with the smallest BIC; ties break toward smaller K.
    """
    if not designs:
        raise ValueError("designs must contain at least one candidate")
    y = np.asarray(y, dtype=float)
    n = y.size
    best_k, best_bic = None, np.inf
    for k in sorted(designs):
        x = designs[k]
        try:
            fit = quantreg.fit_quantile(x, y, tau, weights=weights)
        except Exception as exc:
            raise type(exc)(f"candidate K={k}: {exc}") from exc
        bic = bic_score(fit.objective, n, x.shape[1])
        if bic < best_bic - 1e-12:
            best_k, best_bic = k, bic
    return best_k
