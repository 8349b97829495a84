"""Covariance structures and correlated error sampling.

Five stationary covariance structures (CS, SE, AR1, IND, UN) share a common
parameterization: a marginal standard deviation ``sigma`` and a serial
correlation ``rho`` whose meaning is normalized across structures so that
adjacent design points have correlation ``rho`` (AR1, SE) or every pair does
(CS).  Draws from the implied Gaussian law, or from heavier-tailed Student-t
and Laplace laws with the same covariance, feed the simulation studies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STRUCTURES = ("CS", "SE", "AR1", "IND", "UN")
LAWS = ("Normal", "StudentT", "Laplace")


@dataclass(frozen=True)
class CovarianceSpec:
    """Parameters of one covariance matrix.

    Arguments
    ---------
    structure : str
        One of ``CS`` (compound symmetry), ``SE`` (squared exponential),
        ``AR1``, ``IND`` (independent), ``UN`` (unstructured, seeded).
    dim : int
        Matrix dimension (design-grid size or replicate count).
    rho : float
        Serial correlation in ``[0, 1)``.  Ignored by IND.
    sigma : float
        Marginal standard deviation; every diagonal entry is ``sigma**2``.
    seed : int
        Seed for the UN construction; unused by the other structures.
    """

    structure: str
    dim: int
    rho: float = 0.0
    sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.structure not in STRUCTURES:
            raise ValueError(f"unknown structure {self.structure!r}; expected one of {STRUCTURES}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if not (0.0 <= self.rho < 1.0):
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class ErrorLaw:
    """Marginal law of the error draws.

    ``Normal`` draws are exact; ``StudentT`` and ``Laplace`` use an elliptical
    scale mixture of the Normal draw, rescaled so the covariance matches the
    requested matrix.  StudentT requires ``df > 2`` for the variance to exist.
    """

    kind: str = "Normal"
    df: float = 4.0

    def __post_init__(self):
        if self.kind not in LAWS:
            raise ValueError(f"unknown law {self.kind!r}; expected one of {LAWS}")
        if self.kind == "StudentT" and self.df <= 2:
            raise ValueError(f"StudentT df must exceed 2, got {self.df}")


def build_covariance(spec: CovarianceSpec) -> np.ndarray:
    """Realize the ``dim x dim`` covariance matrix of ``spec``.

    The SE length scale is fixed at ``dt / sqrt(-2 ln rho)`` with ``dt`` the
    spacing of the equally spaced unit-interval grid, so adjacent grid points
    have correlation exactly ``rho``.  UN draws a seeded Wishart factor,
    converts it to a correlation matrix, and blends it convexly with the
    identity (or the all-ones matrix) until the mean off-diagonal correlation
    equals ``rho``.
    """
    d, rho, s2 = spec.dim, spec.rho, spec.sigma**2
    idx = np.arange(d)

    if spec.structure == "IND":
        cov = s2 * np.eye(d)
    elif spec.structure == "AR1":
        cov = s2 * rho ** np.abs(idx[:, None] - idx[None, :])
    elif spec.structure == "CS":
        cov = np.full((d, d), s2 * rho)
        np.fill_diagonal(cov, s2)
    elif spec.structure == "SE":
        if d == 1 or rho == 0.0:
            cov = s2 * np.eye(d)
        else:
            grid = np.linspace(0.0, 1.0, d)
            dt = grid[1] - grid[0]
            ell = dt / np.sqrt(-2.0 * np.log(rho))
            sq = (grid[:, None] - grid[None, :]) ** 2
            cov = s2 * np.exp(-sq / (2.0 * ell**2))
    else:  # UN
        cov = s2 * _un_correlation(d, rho, spec.seed)

    _check_psd(cov, s2)
    return cov


def _un_correlation(d, rho, seed):
    """Seeded random correlation matrix with mean off-diagonal correlation rho."""
    if d == 1:
        return np.ones((1, 1))
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((d, d))
    m = a @ a.T
    inv_sd = 1.0 / np.sqrt(np.diag(m))
    corr = m * inv_sd[:, None] * inv_sd[None, :]
    off = corr[~np.eye(d, dtype=bool)]
    cbar = float(off.mean())
    if cbar >= rho:
        # shrink toward identity: alpha*cbar = rho
        alpha = rho / cbar if cbar > 0 else 0.0
        blended = alpha * corr + (1.0 - alpha) * np.eye(d)
    else:
        # raise toward the all-ones matrix: alpha*cbar + (1-alpha) = rho
        alpha = (1.0 - rho) / (1.0 - cbar)
        blended = alpha * corr + (1.0 - alpha) * np.ones((d, d))
    np.fill_diagonal(blended, 1.0)
    return 0.5 * (blended + blended.T)


def _check_psd(cov, s2):
    w = np.linalg.eigvalsh(0.5 * (cov + cov.T))
    if w.min() < -1e-10 * s2:
        raise AssertionError(f"covariance construction produced a non-PSD matrix (min eig {w.min():.3e})")


def _factor(cov: np.ndarray) -> np.ndarray:
    """Square-root factor F with F @ F.T = cov; raises on non-PSD input."""
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError(f"cov must be a square matrix, got shape {cov.shape}")
    w, v = np.linalg.eigh(0.5 * (cov + cov.T))
    scale = max(abs(w.max()), 1.0) if w.size else 1.0
    if w.min() < -1e-10 * scale:
        raise ValueError(f"cov is not positive semidefinite (min eigenvalue {w.min():.3e})")
    return v * np.sqrt(np.clip(w, 0.0, None))


def sample_correlated(cov: np.ndarray, law: ErrorLaw, n_draws: int, rng) -> np.ndarray:
    """Draw ``n_draws`` i.i.d. zero-mean rows with covariance ``cov``.

    Arguments
    ---------
    cov : ndarray (dim, dim)
        Positive-semidefinite target covariance.
    law : ErrorLaw
        Normal draws are exact.  StudentT divides each Normal row by
        ``sqrt(chi2_df / df)`` and rescales by ``sqrt((df-2)/df)``; Laplace
        multiplies each row by ``sqrt(Exp(1))`` (unit mean, so the covariance
        is already matched).
    n_draws : int
        Number of rows.
    rng : numpy Generator or int seed
        Deterministic given the same seed: draws are bitwise reproducible.

    Returns
    -------
    ndarray (n_draws, dim)
    """
    if n_draws < 0:
        raise ValueError(f"n_draws must be non-negative, got {n_draws}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    f = _factor(cov)
    z = rng.standard_normal((n_draws, f.shape[0]))
    x = z @ f.T
    if law.kind == "StudentT":
        mix = rng.chisquare(law.df, size=n_draws)
        x *= np.sqrt((law.df - 2.0) / mix)[:, None]
    elif law.kind == "Laplace":
        mix = rng.exponential(1.0, size=n_draws)
        x *= np.sqrt(mix)[:, None]
    return x
