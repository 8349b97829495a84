"""Unified fitting pipeline for the six estimators and bootstrap intervals.

Datasets are duck-typed: anything exposing W1 (replicate curves, n x J x T
or a ragged list), W2 (replicate scalars), Z (covariates), Y (responses),
and grid works.  Simulated datasets additionally carry the true X1/X2,
which only the Oracle method touches.
"""

from __future__ import annotations

import logging

import numpy as np

from .basis import basis_for_dimension
from .design import K_CANDIDATES, fit_functional_quantile, select_dimension
from .calibrate import fsmi_calibrate, fui_calibrate
from .results import METHODS, BootstrapResult, EstimateSet
from .simex import SimexConfig, simex_fit

log = logging.getLogger(__name__)


class MissingTruth(ValueError):
    """Oracle estimation requested on data without true covariates."""


def _curve_list(W1):
    if isinstance(W1, np.ndarray):
        W = np.asarray(W1, dtype=float)
        return [W[i] for i in range(W.shape[0])]
    return [np.atleast_2d(np.asarray(r, dtype=float)) for r in W1]


def _scalar_list(W2):
    if isinstance(W2, np.ndarray):
        W = np.asarray(W2, dtype=float)
        return [W[i] for i in range(W.shape[0])]
    return [np.asarray(r, dtype=float).ravel() for r in W2]


def _zmat(dataset, n):
    Z = np.asarray(dataset.Z, dtype=float)
    return Z.reshape(n, 1) if Z.ndim == 1 else Z


def _dataset_weights(dataset, override):
    if override is not None:
        return np.asarray(override, dtype=float)
    w = getattr(dataset, "weights", None)
    return None if w is None else np.asarray(w, dtype=float)


def _truth(dataset):
    X1 = getattr(dataset, "X1", None)
    X2 = getattr(dataset, "X2", None)
    if X1 is None or X2 is None:
        raise MissingTruth("Oracle fit requires true covariates, which this dataset lacks")
    return np.asarray(X1, dtype=float), np.asarray(X2, dtype=float)


def _day_curves(W1, day):
    rows = _curve_list(W1)
    if any(r.shape[0] < day for r in rows):
        raise ValueError(f"naive day {day} is not observed for every subject")
    return np.vstack([r[day - 1] for r in rows])


def _day_scalars(W2, day):
    rows = _scalar_list(W2)
    if any(r.size < day for r in rows):
        raise ValueError(f"naive replicate {day} is not observed for every subject")
    return np.array([r[day - 1] for r in rows])


def _mean_curves(W1):
    return np.vstack([r.mean(axis=0) for r in _curve_list(W1)])


def _mean_scalars(W2):
    return np.array([r.mean() for r in _scalar_list(W2)])


def fit(
    dataset,
    method: str,
    tau: float,
    K=None,
    candidates=K_CANDIDATES,
    degree=3,
    naive_day=1,
    fsmi_window=5,
    simex_config=None,
    weights=None,
) -> EstimateSet:
    """Fit one estimator at one quantile level; returns an EstimateSet.

    The basis dimension is selected by BIC over ``candidates`` unless ``K``
    fixes it.  For SIMEX the dimension is selected on the replicate-averaged
    covariates, then held fixed through the inflation loop.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    w = _dataset_weights(dataset, weights)
    grid = np.asarray(dataset.grid, dtype=float)
    y = np.asarray(dataset.Y, dtype=float)
    n = y.size
    Z = _zmat(dataset, n)
    common = dict(candidates=candidates, weights=w, degree=degree)

    if method == "Oracle":
        X1, X2 = _truth(dataset)
        return fit_functional_quantile(X1, X2, Z, y, tau, grid, "Oracle", K=K, **common)
    if method == "Naive":
        curves = _day_curves(dataset.W1, naive_day)
        x2 = _day_scalars(dataset.W2, naive_day)
        return fit_functional_quantile(curves, x2, Z, y, tau, grid, "Naive", K=K, **common)
    if method == "Average":
        curves = _mean_curves(dataset.W1)
        x2 = _mean_scalars(dataset.W2)
        return fit_functional_quantile(curves, x2, Z, y, tau, grid, "Average", K=K, **common)
    if method == "SIMEX":
        _, est = fit_simex_with_trajectory(
            dataset,
            tau,
            K=K,
            candidates=candidates,
            degree=degree,
            simex_config=simex_config,
            weights=w,
        )
        return est
    cal = (
        fui_calibrate(dataset.W1, W2=dataset.W2)
        if method == "FUI"
        else fsmi_calibrate(dataset.W1, window=fsmi_window, W2=dataset.W2)
    )
    return fit_functional_quantile(
        cal.xhat_functional, cal.xhat_scalar, Z, y, tau, grid, method, K=K, **common
    )


def fit_simex_with_trajectory(
    dataset,
    tau,
    K=None,
    candidates=K_CANDIDATES,
    degree=3,
    simex_config=None,
    weights=None,
):
    """SIMEX fit returning (trajectory, EstimateSet)."""
    grid = np.asarray(dataset.grid, dtype=float)
    y = np.asarray(dataset.Y, dtype=float)
    n = y.size
    Z = _zmat(dataset, n)
    w = _dataset_weights(dataset, weights)
    if K is None:
        curves = _mean_curves(dataset.W1)
        x2 = _mean_scalars(dataset.W2)
        K, basis, _ = select_dimension(
            curves, x2, Z, y, tau, grid, candidates=candidates, weights=w, degree=degree
        )
    else:
        basis = basis_for_dimension(K, grid, degree=degree)
    config = simex_config if simex_config is not None else SimexConfig()
    return simex_fit(dataset, basis, tau, config, weights=w)


class _Resample:
    """Subject-level resample of a dataset: whole records move together."""

    def __init__(self, dataset, idx):
        w1 = _curve_list(dataset.W1)
        w2 = _scalar_list(dataset.W2)
        self.W1 = [w1[i] for i in idx]
        self.W2 = [w2[i] for i in idx]
        self.Z = _zmat(dataset, np.asarray(dataset.Y).size)[idx]
        self.Y = np.asarray(dataset.Y, dtype=float)[idx]
        self.grid = dataset.grid
        X1 = getattr(dataset, "X1", None)
        X2 = getattr(dataset, "X2", None)
        self.X1 = None if X1 is None else np.asarray(X1, dtype=float)[idx]
        self.X2 = None if X2 is None else np.asarray(X2, dtype=float)[idx]
        w = getattr(dataset, "weights", None)
        self.weights = None if w is None else np.asarray(w, dtype=float)[idx]


def bootstrap_ci(
    dataset,
    method: str,
    tau: float,
    B: int,
    level: float = 0.95,
    rng=None,
    refit_K: bool = False,
    **options,
) -> BootstrapResult:
    """Subject-resampling percentile bootstrap around a point fit.

    The point fit's basis dimension is reused in every replicate unless
    ``refit_K`` asks for a fresh BIC scan.  Replicates that fail to fit are
    skipped with a log line; more than 10% failures aborts.
    """
    if B < 2:
        raise ValueError("bootstrap needs B >= 2")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    point = fit(dataset, method, tau, **options)
    rep_options = dict(options)
    if not refit_K:
        rep_options["K"] = point.selected_K
    n = np.asarray(dataset.Y).size
    max_failures = int(np.floor(0.1 * B))

    beta0s, curves, beta2s, gammas = [], [], [], []
    failures = 0
    for b in range(B):
        idx = rng.integers(0, n, size=n)
        if method == "SIMEX":
            base = rep_options.get("simex_config") or SimexConfig()
            rep_options["simex_config"] = SimexConfig(
                lambdas=base.lambdas,
                S=base.S,
                extrapolant=base.extrapolant,
                rng_seed=int(rng.integers(0, 2**31 - 1)),
            )
        try:
            est = fit(_Resample(dataset, idx), method, tau, **rep_options)
        except (ValueError, np.linalg.LinAlgError) as exc:
            failures += 1
            log.warning("bootstrap replicate %d failed: %s", b, exc)
            if failures > max_failures:
                raise RuntimeError(
                    f"bootstrap aborted: {failures} of {b + 1} replicates failed (>10% of B={B})"
                ) from exc
            continue
        beta0s.append(est.beta0)
        curves.append(est.beta1_curve)
        beta2s.append(est.beta2)
        gammas.append(est.gammas)

    alpha = (1.0 - level) / 2.0

    def pct(arr):
        arr = np.asarray(arr)
        lo = np.quantile(arr, alpha, axis=0, method="weibull")
        hi = np.quantile(arr, 1.0 - alpha, axis=0, method="weibull")
        return lo, hi

    b0 = pct(beta0s)
    cv = pct(np.vstack(curves))
    b2 = pct(beta2s)
    gm = pct(np.vstack(gammas))
    return BootstrapResult(
        point=point,
        level=level,
        B=B,
        beta0=(float(b0[0]), float(b0[1])),
        beta1_curve=cv,
        beta2=(float(b2[0]), float(b2[1])),
        gammas=gm,
        failures=failures,
    )


def percent_difference(corrected: EstimateSet, naive: EstimateSet):
    """Average percent difference of a corrected fit from the naive fit.

    Returns (functional, scalar): the functional part averages
    |(corrected - naive)/naive|*100 over grid points, excluding points
    where the naive curve is numerically zero (|value| < 1e-8, logged).
    """
    if corrected.grid.shape != naive.grid.shape or not np.allclose(corrected.grid, naive.grid):
        raise ValueError("estimates live on different grids")
    if corrected.tau != naive.tau:
        raise ValueError("estimates target different quantile levels")
    denom = naive.beta1_curve
    keep = np.abs(denom) >= 1e-8
    if not keep.all():
        log.info("percent_difference: excluded %d near-zero grid points", int((~keep).sum()))
    if not keep.any():
        functional = float("nan")
    else:
        functional = float(
            np.mean(np.abs((corrected.beta1_curve[keep] - denom[keep]) / denom[keep])) * 100.0
        )
    if abs(naive.beta2) < 1e-8:
        scalar = float("nan")
    else:
        scalar = float(abs((corrected.beta2 - naive.beta2) / naive.beta2) * 100.0)
    return functional, scalar
