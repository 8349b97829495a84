"""Result containers shared by the estimator pipeline and their CSV form."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

METHODS = ("Oracle", "Naive", "Average", "SIMEX", "FUI", "FSMI")


@dataclass
class EstimateSet:
    """Fitted coefficients of one quantile model.

    Fields
    ------
    method : str, one of Oracle/Naive/Average/SIMEX/FUI/FSMI
    tau : float
    beta0 : float, intercept
    beta1_curve : ndarray (T,), functional coefficient evaluated on the grid
    beta2 : float, error-prone scalar coefficient
    gammas : ndarray (P,), error-free covariate coefficients
    selected_K : int, basis dimension used
    omega : ndarray (K,), basis coefficients of beta1
    grid : ndarray (T,)
    """

    method: str
    tau: float
    beta0: float
    beta1_curve: np.ndarray
    beta2: float
    gammas: np.ndarray
    selected_K: int
    omega: np.ndarray
    grid: np.ndarray

    def coefficient_vector(self) -> np.ndarray:
        """Full coefficient vector ordered (beta0, omega, beta2, gammas)."""
        return np.concatenate([[self.beta0], self.omega, [self.beta2], self.gammas])


@dataclass
class BootstrapResult:
    """Percentile bootstrap intervals around a point estimate.

    ``lower``/``upper`` hold per-target interval endpoints with the same
    shapes as the point estimate's fields.  ``failures`` counts skipped
    replicates; completed replicates number ``B - failures``.
    """

    point: EstimateSet
    level: float
    B: int
    beta0: tuple
    beta1_curve: tuple  # (lower curve, upper curve)
    beta2: tuple
    gammas: tuple  # (lower vector, upper vector)
    failures: int = 0


def estimates_to_frame(estimates, intervals=None) -> pd.DataFrame:
    """Long-format table of estimates: method, tau, target, grid_index, estimate, lower, upper.

    ``estimates`` is an iterable of EstimateSet; ``intervals`` an optional
    mapping (method, tau) -> BootstrapResult supplying lower/upper columns.
    """
    rows = []
    for est in estimates:
        ci = intervals.get((est.method, est.tau)) if intervals else None

        def row(target, grid_index, value, lo, hi):
            rows.append(
                {
                    "method": est.method,
                    "tau": est.tau,
                    "target": target,
                    "grid_index": grid_index,
                    "estimate": value,
                    "lower": lo,
                    "upper": hi,
                }
            )

        lo, hi = (ci.beta0 if ci else (np.nan, np.nan))
        row("beta0", np.nan, est.beta0, lo, hi)
        lo_c, hi_c = (ci.beta1_curve if ci else (None, None))
        for idx, val in enumerate(est.beta1_curve):
            row(
                "beta1",
                idx,
                val,
                lo_c[idx] if lo_c is not None else np.nan,
                hi_c[idx] if hi_c is not None else np.nan,
            )
        lo, hi = (ci.beta2 if ci else (np.nan, np.nan))
        row("beta2", np.nan, est.beta2, lo, hi)
        lo_g, hi_g = (ci.gammas if ci else (None, None))
        for idx, val in enumerate(est.gammas):
            row(
                f"gamma{idx + 1}",
                np.nan,
                val,
                lo_g[idx] if lo_g is not None else np.nan,
                hi_g[idx] if hi_g is not None else np.nan,
            )
    return pd.DataFrame(rows)
