"""Simulation-extrapolation correction for replicated measurement error.

The estimator inflates the averaged error-prone covariates with extra
simulated noise at levels lambda, refits the quantile model at each level,
averages the coefficient paths over inner repetitions, and extrapolates
each coefficient back to lambda = -1 with a quadratic.  One noise draw per
inner repetition is shared across every lambda so trajectories differ only
through the sqrt(lambda) scaling, keeping them smooth in lambda.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .basis import SplineBasis, project
from .calibrate import InsufficientReplicates
from .design import estimate_from_fit
from .quantreg import QuantileFit, fit_quantile
from .results import EstimateSet

SIMULATION_LAMBDAS = tuple(np.arange(0.0, 2.0001, 0.25))
APPLICATION_LAMBDAS = tuple(np.arange(0.0001, 2.00011, 0.05))


@dataclass(frozen=True)
class SimexConfig:
    """Noise-inflation levels, inner repetition count, and seed."""

    lambdas: tuple = SIMULATION_LAMBDAS
    S: int = 100
    extrapolant: str = "Quadratic"
    rng_seed: int = 0

    def __post_init__(self):
        lam = tuple(float(v) for v in self.lambdas)
        if len(set(lam)) < 3:
            raise ValueError("need at least 3 distinct lambda values")
        if min(lam) < 0.0:
            raise ValueError("lambdas must be non-negative")
        if list(lam) != sorted(lam):
            raise ValueError("lambdas must be sorted ascending")
        object.__setattr__(self, "lambdas", lam)
        if self.S < 1:
            raise ValueError("S must be a positive integer")
        if self.extrapolant != "Quadratic":
            raise ValueError("only the Quadratic extrapolant is supported")


@dataclass
class SimexTrajectory:
    """Averaged coefficient path over lambda plus its extrapolation.

    theta_bar is (len(lambdas), p) with columns ordered like the design
    (intercept, basis coefficients, scalar, covariates); extrapolated is
    the fitted quadratic at lambda = -1 and naive_at_zero at lambda = 0.
    """

    lambdas: np.ndarray
    theta_bar: np.ndarray
    extrapolated: np.ndarray
    naive_at_zero: np.ndarray


def _replicate_deviations(Wcoef):
    """Per-observation deviations from subject means, and replicate counts."""
    if isinstance(Wcoef, np.ndarray):
        W = np.asarray(Wcoef, dtype=float)
        if W.ndim == 2:
            W = W[:, :, None]
        rows = [W[i] for i in range(W.shape[0])]
    else:
        # 1-D entries are replicate vectors of a scalar: L replicates of dim 1
        rows = [
            r.reshape(-1, 1) if (r := np.asarray(e, dtype=float)).ndim == 1 else r
            for e in Wcoef
        ]
    counts = np.array([r.shape[0] for r in rows])
    if counts.min() < 2:
        raise InsufficientReplicates("error covariance estimation needs replicates (J >= 2)")
    devs = [r - r.mean(axis=0, keepdims=True) for r in rows]
    return devs, counts


def estimate_error_covariance(Wcoef) -> np.ndarray:
    """Replicate-deviation sample covariance of basis coefficients.

    Wcoef is n x J x K; the (k, k') entry sums deviation products over all
    subject-replicate pairs and divides by the pooled within degrees of
    freedom sum(J_i - 1).
    """
    devs, counts = _replicate_deviations(Wcoef)
    K = devs[0].shape[1]
    acc = np.zeros((K, K))
    for d in devs:
        acc += d.T @ d
    sigma = acc / float((counts - 1).sum())
    return 0.5 * (sigma + sigma.T)


def estimate_scalar_error_variance(W2) -> float:
    """Pooled within-subject variance of a replicated scalar."""
    devs, counts = _replicate_deviations(W2)
    num = sum(float((d**2).sum()) for d in devs)
    return num / float((counts - 1).sum())


def _quadratic_coefs(lambdas, values):
    """Least-squares (phi0, phi1, phi2) per column of ``values``."""
    lam = np.asarray(lambdas, dtype=float)
    if np.unique(lam).size < 3:
        raise ValueError("quadratic extrapolation needs at least 3 distinct lambdas")
    V = np.column_stack([np.ones_like(lam), lam, lam**2])
    coefs, *_ = np.linalg.lstsq(V, np.asarray(values, dtype=float), rcond=None)
    return coefs


def quadratic_extrapolate(lambdas, values) -> float:
    """Fit phi0 + phi1*lambda + phi2*lambda^2 and evaluate at lambda = -1."""
    phi = _quadratic_coefs(lambdas, np.asarray(values, dtype=float).ravel())
    return float(phi[0] - phi[1] + phi[2])


def _psd_repair(sigma):
    """Clip negative eigenvalues to zero; returns (matrix, factor) with factor @ factor.T = matrix."""
    vals, vecs = np.linalg.eigh(sigma)
    clipped = np.clip(vals, 0.0, None)
    factor = vecs * np.sqrt(clipped)
    return (vecs * clipped) @ vecs.T, factor


def _coef_rows(W1, basis):
    """Project replicate curves through the basis: list of (J_i, K) arrays."""
    if isinstance(W1, np.ndarray):
        W = np.asarray(W1, dtype=float)
        n, J, T = W.shape
        flat = project(W.reshape(n * J, T), basis)
        return [flat[i * J : (i + 1) * J] for i in range(n)]
    return [project(np.atleast_2d(np.asarray(r, dtype=float)), basis) for r in W1]


def simex_fit(dataset, basis: SplineBasis, tau, config: SimexConfig, weights=None):
    """Run the full correction; returns (SimexTrajectory, EstimateSet).

    ``dataset`` supplies replicated curves W1, replicated scalars W2,
    covariates Z, and responses Y.  The basis dimension is fixed by the
    caller (selected once on the averaged covariates).
    """
    coef_rows = _coef_rows(dataset.W1, basis)
    n = len(coef_rows)
    K = basis.K
    wbar = np.vstack([r.mean(axis=0) for r in coef_rows])
    J_counts = np.array([r.shape[0] for r in coef_rows], dtype=float)

    w2_rows = (
        [np.asarray(r, dtype=float).ravel() for r in dataset.W2]
        if not isinstance(dataset.W2, np.ndarray)
        else [np.asarray(dataset.W2, dtype=float)[i] for i in range(n)]
    )
    w2bar = np.array([r.mean() for r in w2_rows])
    L_counts = np.array([r.size for r in w2_rows], dtype=float)

    sigma_u1 = estimate_error_covariance(coef_rows)
    sigma_u1, factor = _psd_repair(sigma_u1)
    sig2_u2 = estimate_scalar_error_variance(w2_rows)

    Z = np.asarray(dataset.Z, dtype=float)
    if Z.ndim == 1:
        Z = Z.reshape(n, 1)
    y = np.asarray(dataset.Y, dtype=float)
    lambdas = np.asarray(config.lambdas, dtype=float)
    p = 1 + K + 1 + Z.shape[1]

    ones = np.ones((n, 1))
    rng = np.random.default_rng(config.rng_seed)
    acc = np.zeros((lambdas.size, p))
    for _ in range(config.S):
        # one draw per repetition, shared across lambdas
        u1 = (rng.standard_normal((n, K)) @ factor.T) / np.sqrt(J_counts)[:, None]
        u2 = rng.standard_normal(n) * np.sqrt(sig2_u2 / L_counts)
        for m, lam in enumerate(lambdas):
            root = np.sqrt(lam)
            X = np.hstack([ones, wbar + root * u1, (w2bar + root * u2).reshape(n, 1), Z])
            acc[m] += fit_quantile(X, y, tau, weights=weights).coefficients
    theta_bar = acc / config.S

    phi = _quadratic_coefs(lambdas, theta_bar)
    extrapolated = phi[0] - phi[1] + phi[2]
    trajectory = SimexTrajectory(
        lambdas=lambdas,
        theta_bar=theta_bar,
        extrapolated=extrapolated,
        naive_at_zero=phi[0].copy(),
    )
    estimate = _estimate_from_vector(extrapolated, basis, tau)
    return trajectory, estimate


def _estimate_from_vector(coefs, basis, tau):
    fit = QuantileFit(
        tau=float(tau),
        coefficients=np.asarray(coefs, dtype=float),
        objective=float("nan"),
        iterations=0,
        status="Extrapolated",
    )
    return estimate_from_fit(fit, basis, tau, "SIMEX", basis.grid)


def trajectory_to_frame(trajectory: SimexTrajectory) -> pd.DataFrame:
    """Long-format table: lambda, coef_index, mean_estimate."""
    M, p = trajectory.theta_bar.shape
    return pd.DataFrame(
        {
            "lambda": np.repeat(trajectory.lambdas, p),
            "coef_index": np.tile(np.arange(p), M),
            "mean_estimate": trajectory.theta_bar.ravel(),
        }
    )
