"""Stage-one calibration of replicated error-prone covariates.

Three mixed-model predictors share one closed-form engine: a scalar
random-intercept fit for replicated scalars, a point-wise functional
variant (one independent fit per grid index), and a windowed variant that
pools neighbouring grid points as extra replicates of a locally constant
signal before predicting at the window center.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import SplineBasis
from .design import assemble_design, estimate_from_fit
from .quantreg import fit_quantile
from .results import EstimateSet


class InsufficientReplicates(ValueError):
    """Raised when a calibration needs at least two replicates and has fewer."""


@dataclass
class RandomInterceptFit:
    """Moment-estimated one-way random intercept model.

    subject_blups are the shrunken deviations; predictions are
    fixed_intercept + subject_blups.  For unbalanced replicate counts,
    shrinkages holds the per-subject factors and ``shrinkage`` their mean.
    """

    fixed_intercept: float
    subject_blups: np.ndarray
    var_between: float
    var_within: float
    shrinkage: float
    shrinkages: np.ndarray

    @property
    def predictions(self) -> np.ndarray:
        return self.fixed_intercept + self.subject_blups


@dataclass
class CalibratedCovariates:
    """Predicted covariates ready for a quantile fit.

    xhat_scalar is None until a replicated scalar is calibrated alongside
    the curves (pass W2 to fui_calibrate/fsmi_calibrate).
    """

    xhat_functional: np.ndarray
    xhat_scalar: np.ndarray | None
    method: str


def _as_rows(W):
    """Normalise replicate input to a list of 1-D float arrays."""
    if isinstance(W, np.ndarray):
        W = np.asarray(W, dtype=float)
        if W.ndim != 2:
            raise ValueError("replicate matrix must be 2-D")
        return [W[i] for i in range(W.shape[0])], True
    rows = [np.asarray(r, dtype=float).ravel() for r in W]
    counts = {r.size for r in rows}
    return rows, len(counts) == 1


def _balanced_moments(block):
    """ANOVA moments for an n x m balanced replicate block.

    Returns (grand_mean, subject_means, var_within, var_between, shrinkage).
    """
    n, m = block.shape
    if n < 2:
        raise ValueError("calibration needs at least 2 subjects")
    if m < 2:
        raise InsufficientReplicates("calibration needs at least 2 replicates per subject")
    M = block.mean(axis=1)
    G = float(M.mean())
    var_w = float(((block - M[:, None]) ** 2).sum() / (n * (m - 1)))
    msb = float(m * ((M - G) ** 2).sum() / (n - 1))
    var_b = max(0.0, (msb - var_w) / m)
    denom = var_b + var_w / m
    shrink = var_b / denom if denom > 0.0 else 0.0
    return G, M, var_w, var_b, shrink


def _unbalanced_moments(rows):
    """Moment estimators for unequal replicate counts (standard one-way ANOVA).

    Effective count n0 = (sum L_i - sum L_i^2 / sum L_i)/(n-1) replaces L in
    the between-variance recovery; shrinkage stays subject-specific.
    """
    n = len(rows)
    if n < 2:
        raise ValueError("calibration needs at least 2 subjects")
    counts = np.array([r.size for r in rows], dtype=float)
    if counts.min() < 2:
        raise InsufficientReplicates("calibration needs at least 2 replicates per subject")
    N = counts.sum()
    M = np.array([r.mean() for r in rows])
    G = float(sum(r.sum() for r in rows) / N)
    ssw = sum(float(((r - mi) ** 2).sum()) for r, mi in zip(rows, M))
    var_w = ssw / (N - n)
    msb = float((counts * (M - G) ** 2).sum() / (n - 1))
    n0 = (N - (counts**2).sum() / N) / (n - 1)
    var_b = max(0.0, (msb - var_w) / n0)
    denom = var_b + var_w / counts
    shrinks = np.where(denom > 0.0, var_b / denom, 0.0)
    return G, M, var_w, var_b, shrinks


def fit_scalar_random_intercept(W) -> RandomInterceptFit:
    """Calibrate a replicated scalar: predictions shrink subject means toward the grand mean.

    W is n x L (or a list of per-subject replicate vectors for unequal
    counts).  Negative moment estimates of the between-variance truncate
    to 0, which drives the shrinkage to 0 as well.
    """
    rows, balanced = _as_rows(W)
    if balanced:
        block = np.vstack(rows)
        G, M, var_w, var_b, shrink = _balanced_moments(block)
        shrinks = np.full(len(rows), shrink)
    else:
        G, M, var_w, var_b, shrinks = _unbalanced_moments(rows)
        shrink = float(shrinks.mean())
    return RandomInterceptFit(
        fixed_intercept=G,
        subject_blups=shrinks * (M - G),
        var_between=var_b,
        var_within=var_w,
        shrinkage=float(shrink),
        shrinkages=np.asarray(shrinks, dtype=float),
    )


def _curve_rows(W):
    """Normalise functional replicate input to a list of (J_i, T) arrays."""
    if isinstance(W, np.ndarray):
        W = np.asarray(W, dtype=float)
        if W.ndim != 3:
            raise ValueError("functional replicates must be n x J x T")
        return [W[i] for i in range(W.shape[0])], True, W.shape[2]
    rows = [np.atleast_2d(np.asarray(r, dtype=float)) for r in W]
    T = rows[0].shape[1]
    if any(r.shape[1] != T for r in rows):
        raise ValueError("all subjects must share one grid length")
    counts = {r.shape[0] for r in rows}
    return rows, len(counts) == 1, T


def _windowed_calibrate(W, window, method, W2=None):
    rows, balanced, T = _curve_rows(W)
    if window % 2 == 0 or window < 1:
        raise ValueError("window must be an odd positive integer")
    if window > T:
        raise ValueError("window exceeds grid length")
    n = len(rows)
    h = window // 2
    xhat = np.empty((n, T))
    if balanced:
        cube = np.stack(rows)  # (n, J, T)
        for c in range(T):
            lo, hi = max(0, c - h), min(T, c + h + 1)
            block = cube[:, :, lo:hi].reshape(n, -1)
            G, M, _, _, shrink = _balanced_moments(block)
            xhat[:, c] = G + shrink * (M - G)
    else:
        for c in range(T):
            lo, hi = max(0, c - h), min(T, c + h + 1)
            blocks = [r[:, lo:hi].ravel() for r in rows]
            G, M, _, _, shrinks = _unbalanced_moments(blocks)
            xhat[:, c] = G + shrinks * (M - G)
    xhat_scalar = fit_scalar_random_intercept(W2).predictions if W2 is not None else None
    return CalibratedCovariates(xhat_functional=xhat, xhat_scalar=xhat_scalar, method=method)


def fui_calibrate(W, W2=None) -> CalibratedCovariates:
    """Point-wise calibration: an independent random-intercept fit per grid index.

    W is n x J x T (or ragged list of per-subject day matrices).  Passing
    W2 also calibrates the replicated scalar into xhat_scalar.
    """
    return _windowed_calibrate(W, 1, "FUI", W2=W2)


def fsmi_calibrate(W, window: int = 5, W2=None) -> CalibratedCovariates:
    """Windowed calibration: pools ``window`` grid points as replicates per fit.

    Odd window centered at each grid index, truncated at the edges;
    window=1 reproduces fui_calibrate exactly.
    """
    return _windowed_calibrate(W, int(window), "FSMI", W2=W2)


def calibrated_quantile_fit(
    calibrated: CalibratedCovariates, basis: SplineBasis, y, Z, tau, weights=None
) -> EstimateSet:
    """Quantile fit on calibrated covariates with basis-expanded curves."""
    if calibrated.xhat_scalar is None:
        raise ValueError("calibrated covariates lack a scalar prediction; calibrate W2 as well")
    X = assemble_design(calibrated.xhat_functional, basis, calibrated.xhat_scalar, Z)
    fit = fit_quantile(X, np.asarray(y, dtype=float), tau, weights=weights)
    return estimate_from_fit(fit, basis, tau, calibrated.method, basis.grid)
