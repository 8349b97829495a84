"""Simulation studies: data generation, Monte-Carlo driver, and metrics.

The generator draws a logistic-mean functional covariate with correlated
noise, replicated error-prone observations of it, a replicated error-prone
scalar, two clean covariates, and a response built by trapezoid quadrature
of sin(2*pi*t) against the curve.  Six preset families vary sample size,
error law, covariance structure, serial correlation, error magnitude, and
the scalar coefficient.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .covkern import CovarianceSpec, ErrorLaw, build_covariance, sample_correlated
from .estimators import fit as fit_estimator
from .results import METHODS

log = logging.getLogger(__name__)

_NORMAL = ErrorLaw("Normal")


def true_beta1(grid) -> np.ndarray:
    """The generating functional coefficient sin(2*pi*t), tau-invariant."""
    return np.sin(2.0 * np.pi * np.asarray(grid, dtype=float))


def _default_x1_cov():
    return CovarianceSpec("AR1", 100, rho=0.5, sigma=3.0, seed=1)


def _default_u1_cov():
    return CovarianceSpec("AR1", 100, rho=0.5, sigma=2.5, seed=2)


@dataclass(frozen=True)
class SimConfig:
    """One simulation condition.

    sigma_eps is the response noise scale; the default 0.5 places the BIC
    dimension choice in the regime the reference metric windows assume
    (small bases win until n is in the thousands).
    """

    n: int
    T: int = 100
    J: int = 7
    L: int = 7
    x1_cov: CovarianceSpec = field(default_factory=_default_x1_cov)
    u1_cov: CovarianceSpec = field(default_factory=_default_u1_cov)
    u1_law: ErrorLaw = _NORMAL
    u2_law: ErrorLaw = _NORMAL
    sigma_x2: float = 0.5
    sigma_u2: float = 0.25
    beta2: float = 0.5
    gamma: tuple = (1.0, 1.0)
    sigma_zc: float = 0.5
    p_zb: float = 0.6
    sigma_eps: float = 0.5
    taus: tuple = (0.25, 0.5, 0.75, 0.95)
    R: int = 500
    seed: int = 0
    label: str = ""

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        for name in ("sigma_x2", "sigma_u2", "sigma_zc", "sigma_eps"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.p_zb < 1.0:
            raise ValueError("p_zb must lie in (0, 1)")
        if any(not 0.0 < t < 1.0 for t in self.taus):
            raise ValueError("taus must lie in (0, 1)")
        if self.x1_cov.dim != self.T or self.u1_cov.dim != self.T:
            raise ValueError("covariance dimension must equal the grid size T")
        object.__setattr__(self, "gamma", tuple(float(g) for g in self.gamma))
        object.__setattr__(self, "taus", tuple(float(t) for t in self.taus))


@dataclass
class SimDataset:
    """One generated sample; U1 is retained so W1 - X1 can be audited."""

    X1: np.ndarray
    W1: np.ndarray
    X2: np.ndarray
    W2: np.ndarray
    Zc: np.ndarray
    Zb: np.ndarray
    Y: np.ndarray
    grid: np.ndarray
    U1: np.ndarray

    @property
    def Z(self) -> np.ndarray:
        return np.column_stack([self.Zc, self.Zb])


def generate_dataset(config: SimConfig, rng) -> SimDataset:
    """Draw one dataset; ``rng`` is a numpy Generator or a seed."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    n, T, J, L = config.n, config.T, config.J, config.L
    grid = np.linspace(0.0, 1.0, T)
    mean_curve = 1.0 / (1.0 + np.exp(8.0 * (grid - 0.5)))

    X1 = mean_curve + sample_correlated(build_covariance(config.x1_cov), _NORMAL, n, rng)
    U1 = sample_correlated(
        build_covariance(config.u1_cov), config.u1_law, n * J, rng
    ).reshape(n, J, T)
    W1 = X1[:, None, :] + U1

    X2 = 2.0 + rng.normal(0.0, config.sigma_x2, n)
    u2_cov = build_covariance(CovarianceSpec("IND", 1, sigma=config.sigma_u2))
    U2 = sample_correlated(u2_cov, config.u2_law, n * L, rng).reshape(n, L)
    W2 = X2[:, None] + U2

    Zc = rng.normal(1.0, config.sigma_zc, n)
    Zb = (rng.random(n) < config.p_zb).astype(float)

    w = np.full(T, grid[1] - grid[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    integral = X1 @ (true_beta1(grid) * w)
    Y = (
        integral
        + config.beta2 * X2
        + config.gamma[0] * Zc
        + config.gamma[1] * Zb
        + rng.normal(0.0, config.sigma_eps, n)
    )
    return SimDataset(X1=X1, W1=W1, X2=X2, W2=W2, Zc=Zc, Zb=Zb, Y=Y, grid=grid, U1=U1)


def functional_metrics(curves, true_curve):
    """Grid-averaged squared bias, Monte-Carlo variance, and their sum.

    curves is (R, T): fitted coefficient curves across replicates.
    """
    curves = np.asarray(curves, dtype=float)
    mean_curve = curves.mean(axis=0)
    abias2 = float(((mean_curve - true_curve) ** 2).mean())
    avar = float(((curves - mean_curve) ** 2).mean())
    return abias2, avar, abias2 + avar


def scalar_metrics(values, true_value):
    """Absolute bias, variance (1/R normalisation), and their AIMSE analog."""
    values = np.asarray(values, dtype=float)
    mean = values.mean()
    bias_abs = float(abs(mean - true_value))
    var = float(((values - mean) ** 2).mean())
    return bias_abs, var, bias_abs**2 + var


@dataclass
class MetricsTable:
    """Per-(method, tau) metric rows for one simulation condition."""

    config: SimConfig
    frame: pd.DataFrame

    def row(self, method: str, tau: float) -> pd.Series:
        sel = self.frame[(self.frame["method"] == method) & (self.frame["tau"] == tau)]
        if sel.empty:
            raise KeyError(f"no metrics for ({method}, {tau})")
        return sel.iloc[0]


def _name_of(entry):
    return entry if isinstance(entry, str) else getattr(entry, "name", repr(entry))


def _replicate_fits(config, entries, fit_options, seed, index):
    """One replicate: generate a dataset, fit every entry at every tau.

    Returns (name, tau, curve, beta2, gammas, K) tuples for the fits that
    succeeded; failures are logged and omitted.
    """
    dataset = generate_dataset(config, np.random.default_rng(seed))
    out = []
    for entry in entries:
        for tau in config.taus:
            try:
                if callable(entry):
                    est = entry(dataset, tau)
                else:
                    est = fit_estimator(dataset, entry, tau, **fit_options.get(entry, {}))
            except (ValueError, np.linalg.LinAlgError) as exc:
                log.warning(
                    "replicate %d, %s, tau=%.2f failed: %s", index, _name_of(entry), tau, exc
                )
                continue
            out.append((_name_of(entry), tau, est.beta1_curve, est.beta2, est.gammas, est.selected_K))
    return out


def run_study(config: SimConfig, estimators=METHODS, fit_options=None, n_jobs=1) -> MetricsTable:
    """Monte-Carlo driver: R replicates, each fitting every estimator at every tau.

    ``estimators`` entries are method names or callables (dataset, tau) ->
    EstimateSet.  ``fit_options`` maps method name -> keyword options for
    the fit.  Failures are logged and skipped; each metrics row reports the
    number of completed replicates.  ``n_jobs`` > 1 runs replicates in
    worker processes (entries must then be picklable; names always are);
    results are identical for any job count because every replicate draws
    from its own pre-spawned seed.
    """
    if config.R < 2:
        raise ValueError("run_study needs R >= 2 replicates")
    fit_options = fit_options or {}
    grid = np.linspace(0.0, 1.0, config.T)
    truth_curve = true_beta1(grid)

    entries = tuple(estimators)
    store = {(_name_of(e), t): {"curves": [], "b2": [], "gm": [], "K": []} for e in entries for t in config.taus}
    seeds = np.random.SeedSequence(config.seed).spawn(config.R)
    if n_jobs and n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            futures = [
                pool.submit(_replicate_fits, config, entries, fit_options, seeds[r], r)
                for r in range(config.R)
            ]
            batches = [f.result() for f in futures]
    else:
        batches = [
            _replicate_fits(config, entries, fit_options, seeds[r], r) for r in range(config.R)
        ]
    for batch in batches:
        for name, tau, curve, b2, gm, K in batch:
            slot = store[(name, tau)]
            slot["curves"].append(curve)
            slot["b2"].append(b2)
            slot["gm"].append(gm)
            slot["K"].append(K)

    rows = []
    for (method, tau), slot in store.items():
        completed = len(slot["curves"])
        if completed < 2:
            raise RuntimeError(f"({method}, tau={tau}): only {completed} replicates completed")
        fa, fv, fm = functional_metrics(np.vstack(slot["curves"]), truth_curve)
        sa, sv, sm = scalar_metrics(slot["b2"], config.beta2)
        row = {
            "label": config.label,
            "method": method,
            "tau": tau,
            "func_abias2": fa,
            "func_avar": fv,
            "func_aimse": fm,
            "scalar_bias_abs": sa,
            "scalar_var": sv,
            "scalar_aimse": sm,
            "completed": completed,
            "mean_K": float(np.mean(slot["K"])),
        }
        gm = np.vstack(slot["gm"])
        for j in range(gm.shape[1]):
            true_g = config.gamma[j] if j < len(config.gamma) else 0.0
            gb, gv, _ = scalar_metrics(gm[:, j], true_g)
            row[f"gamma{j + 1}_bias_abs"] = gb
            row[f"gamma{j + 1}_var"] = gv
        rows.append(row)
    return MetricsTable(config=config, frame=pd.DataFrame(rows))


_BASELINE = dict(n=500)

_STRUCTURES_3 = ("CS", "SE", "AR1", "IND", "UN")


def study_presets(study: int):
    """Configuration lists for the six studies.

    1: sample sizes; 2: error laws; 3: covariance structure pairs;
    4: serial correlation by structure; 5: error magnitudes (functional
    then scalar half); 6: scalar coefficient values.
    """
    if study == 1:
        return [SimConfig(n=n, label=f"n={n}") for n in (100, 500, 1000, 2000, 5000)]
    if study == 2:
        # heavy-tail scalar errors keep their raw-draw variances (1.0 for t,
        # 2.0 for Laplace); the functional error stays variance-matched at 2.5
        laws = [
            ("Normal", ErrorLaw("Normal"), 0.25),
            ("t", ErrorLaw("StudentT", df=4.0), 1.0),
            ("Laplace", ErrorLaw("Laplace"), math.sqrt(2.0)),
        ]
        return [
            SimConfig(n=500, u1_law=law, u2_law=law, sigma_u2=s, label=name)
            for name, law, s in laws
        ]
    if study == 3:
        out = []
        for xs in _STRUCTURES_3:
            for us in _STRUCTURES_3:
                if xs == "IND" and us in ("AR1", "IND"):
                    continue
                out.append(
                    SimConfig(
                        n=500,
                        x1_cov=CovarianceSpec(xs, 100, rho=0.5, sigma=3.0, seed=1),
                        u1_cov=CovarianceSpec(us, 100, rho=0.5, sigma=2.5, seed=2),
                        label=f"{xs}/{us}",
                    )
                )
        return out
    if study == 4:
        return [
            SimConfig(
                n=500,
                x1_cov=CovarianceSpec(s, 100, rho=rho, sigma=3.0, seed=1),
                u1_cov=CovarianceSpec(s, 100, rho=rho, sigma=2.5, seed=2),
                label=f"{s}, rho={rho}",
            )
            for rho in (0.25, 0.5, 0.75)
            for s in ("CS", "AR1", "UN")
        ]
    if study == 5:
        out = []
        for sx in (1.0, 1.5, 2.0, 4.0):
            for su in (0.5, 1.0, 2.0):
                out.append(
                    SimConfig(
                        n=500,
                        x1_cov=CovarianceSpec("AR1", 100, rho=0.5, sigma=sx, seed=1),
                        u1_cov=CovarianceSpec("AR1", 100, rho=0.5, sigma=su, seed=2),
                        label=f"functional sigma_x={sx} sigma_u={su} ratio={sx / su:g}",
                    )
                )
        for sx in (1.0, 1.5, 2.0, 4.0):
            for su in (0.5, 1.0, 2.0):
                out.append(
                    SimConfig(
                        n=500,
                        sigma_x2=sx,
                        sigma_u2=su,
                        label=f"scalar sigma_x={sx} sigma_u={su} ratio={sx / su:g}",
                    )
                )
        return out
    if study == 6:
        return [SimConfig(n=500, beta2=b, label=f"beta2={b}") for b in (0.5, 1.0, 1.5, 2.0, 4.0)]
    raise ValueError(f"unknown study id {study}; expected 1..6")


def study_frame(tables, tau) -> pd.DataFrame:
    """Wide per-condition table at one tau: metric columns per estimator.

    Rows follow the preset order; columns group the functional triple then
    the scalar triple for each method, mirroring the reference layout.
    """
    rows = []
    for table in tables:
        frame = table.frame
        sub = frame[frame["tau"] == tau]
        row = {"condition": table.config.label}
        for metric in (
            "func_abias2",
            "func_avar",
            "func_aimse",
            "scalar_bias_abs",
            "scalar_var",
            "scalar_aimse",
        ):
            for _, rec in sub.iterrows():
                row[f"{metric}_{rec['method']}"] = rec[metric]
        row["completed"] = int(sub["completed"].min()) if not sub.empty else 0
        rows.append(row)
    return pd.DataFrame(rows)
