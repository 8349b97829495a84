"""Batch command line: simulation studies, dataset fits, and fit comparison.

Three subcommands.  ``simulate`` runs a preset or configured study and
writes one wide metrics CSV per quantile level.  ``fit`` loads a dataset
described by a JSON config, fits one estimator at one or more quantile
levels, optionally bootstraps intervals, and writes estimate tables plus a
coefficient-curve SVG per level.  ``compare`` reads fit outputs and tables
the percent difference of each against a baseline fit.

Every run writes a ``manifest.json`` (last) recording the command, the
resolved configuration, the seed actually used, the package version, start
and end timestamps, and a SHA-256 digest of every emitted file.  All
randomness flows from ``--seed``; omitting it draws a seed and records it.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import pandas as pd

from .covkern import CovarianceSpec, ErrorLaw
from .dataio import load_from_config
from .estimators import MissingTruth, bootstrap_ci, fit, fit_simex_with_trajectory, percent_difference
from .results import METHODS, EstimateSet, estimates_to_frame
from .simex import SimexConfig, trajectory_to_frame
from .simstudy import SimConfig, run_study, study_frame, study_presets

log = logging.getLogger(__name__)

_CANONICAL = {name.lower(): name for name in METHODS}


def _version() -> str:
    try:
        from importlib.metadata import version

        return version("artifact")
    except Exception:
        return "unknown"


def _utc_now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _draw_seed() -> int:
    return int(np.random.SeedSequence().generate_state(1, dtype=np.uint64)[0])


def _subseeds(seed: int, count: int):
    words = np.random.SeedSequence(seed).generate_state(count, dtype=np.uint64)
    return [int(w) for w in words]


def _write_manifest(out_dir, command, config, seed, started, outputs):
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "version": _version(),
        "started": started,
        "finished": _utc_now(),
        "outputs": {os.path.basename(p): _sha256(p) for p in outputs},
    }
    path = Path(out_dir) / "manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _tau_tag(tau: float) -> str:
    return f"{tau:g}"


# ---------------------------------------------------------------------------
# simulate


def _cov_from_dict(doc, T):
    return CovarianceSpec(
        doc["structure"],
        int(doc.get("dim", T)),
        rho=float(doc.get("rho", 0.0)),
        sigma=float(doc.get("sigma", 1.0)),
        seed=int(doc.get("seed", 0)),
    )


def _law_from_value(value):
    if isinstance(value, str):
        return ErrorLaw(value)
    return ErrorLaw(value["kind"], df=float(value.get("df", 4.0)))


def _config_from_dict(doc) -> SimConfig:
    doc = dict(doc)
    T = int(doc.get("T", 100))
    for key in ("x1_cov", "u1_cov"):
        if key in doc:
            doc[key] = _cov_from_dict(doc[key], T)
    for key in ("u1_law", "u2_law"):
        if key in doc:
            doc[key] = _law_from_value(doc[key])
    for key in ("gamma", "taus"):
        if key in doc:
            doc[key] = tuple(doc[key])
    return SimConfig(**doc)


def _load_study_configs(args):
    if args.study is not None:
        return study_presets(args.study), f"study{args.study}"
    with open(args.config) as fh:
        doc = json.load(fh)
    if isinstance(doc, dict) and "conditions" in doc:
        doc = doc["conditions"]
    if isinstance(doc, dict):
        doc = [doc]
    configs = [_config_from_dict(d) for d in doc]
    return configs, "custom"


def cmd_simulate(args) -> int:
    out = _out_dir(args)
    started = _utc_now()
    configs, stem = _load_study_configs(args)
    if args.full:
        replicates = 500
    elif args.replicates is not None:
        replicates = args.replicates
    else:
        replicates = None

    seed = args.seed if args.seed is not None else _draw_seed()
    condition_seeds = _subseeds(seed, len(configs))
    resolved = []
    for cfg, cseed in zip(configs, condition_seeds):
        changes = {"seed": cseed}
        if replicates is not None:
            changes["R"] = replicates
        if args.taus:
            changes["taus"] = tuple(args.taus)
        resolved.append(dataclasses.replace(cfg, **changes))

    tables = [run_study(cfg, n_jobs=args.jobs) for cfg in resolved]

    outputs = []
    taus = sorted({t for cfg in resolved for t in cfg.taus})
    for tau in taus:
        path = out / f"{stem}_tau{_tau_tag(tau)}.csv"
        study_frame(tables, tau).to_csv(path, index=False)
        outputs.append(path)
    long_path = out / f"{stem}_metrics_long.csv"
    pd.concat([t.frame for t in tables], ignore_index=True).to_csv(long_path, index=False)
    outputs.append(long_path)

    config_doc = {
        "study": args.study,
        "config_path": args.config,
        "conditions": [dataclasses.asdict(cfg) for cfg in resolved],
        "jobs": args.jobs,
        "full": args.full,
        "out": str(out),
    }
    _write_manifest(out, "simulate", config_doc, seed, started, outputs)
    return 0


# ---------------------------------------------------------------------------
# fit


def _svg_curve(path, grid, curve, lower=None, upper=None, title=""):
    """Self-contained SVG line plot with an optional confidence band."""
    width, height = 640, 400
    ml, mr, mt, mb = 60, 20, 30, 40
    grid = np.asarray(grid, dtype=float)
    series = [np.asarray(curve, dtype=float)]
    if lower is not None:
        series += [np.asarray(lower, dtype=float), np.asarray(upper, dtype=float)]
    lo = min(float(s.min()) for s in series)
    hi = max(float(s.max()) for s in series)
    pad = 0.05 * (hi - lo) if hi > lo else 1.0
    lo, hi = lo - pad, hi + pad

    def sx(t):
        return ml + (t - grid[0]) / (grid[-1] - grid[0]) * (width - ml - mr)

    def sy(v):
        return height - mb - (v - lo) / (hi - lo) * (height - mt - mb)

    def points(ts, vs):
        return " ".join(f"{sx(t):.2f},{sy(v):.2f}" for t, v in zip(ts, vs))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2}" y="20" text-anchor="middle" font-family="sans-serif" '
        f'font-size="14">{title}</text>',
    ]
    if lower is not None:
        band = points(grid, np.asarray(upper, dtype=float)) + " " + points(
            grid[::-1], np.asarray(lower, dtype=float)[::-1]
        )
        parts.append(f'<polygon points="{band}" fill="#9ecae1" fill-opacity="0.5"/>')
    if lo < 0.0 < hi:
        y0 = sy(0.0)
        parts.append(
            f'<line x1="{ml}" y1="{y0:.2f}" x2="{width - mr}" y2="{y0:.2f}" '
            f'stroke="#999999" stroke-dasharray="4 3"/>'
        )
    parts.append(
        f'<polyline points="{points(grid, np.asarray(curve, dtype=float))}" fill="none" '
        f'stroke="#08519c" stroke-width="2"/>'
    )
    axes = (
        f'<line x1="{ml}" y1="{height - mb}" x2="{width - mr}" y2="{height - mb}" stroke="black"/>'
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{height - mb}" stroke="black"/>'
    )
    labels = (
        f'<text x="{ml}" y="{height - mb + 16}" font-family="sans-serif" font-size="11" '
        f'text-anchor="middle">{grid[0]:g}</text>'
        f'<text x="{width - mr}" y="{height - mb + 16}" font-family="sans-serif" font-size="11" '
        f'text-anchor="middle">{grid[-1]:g}</text>'
        f'<text x="{ml - 6}" y="{sy(lo) + 4:.2f}" font-family="sans-serif" font-size="11" '
        f'text-anchor="end">{lo:.3g}</text>'
        f'<text x="{ml - 6}" y="{sy(hi) + 4:.2f}" font-family="sans-serif" font-size="11" '
        f'text-anchor="end">{hi:.3g}</text>'
    )
    parts += [axes, labels, "</svg>"]
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
        fh.write("\n")


def _fit_one_tau(dataset, method, tau, fit_options, B, level, refit_K, seed):
    """Point fit (plus trajectory for SIMEX) and optional bootstrap at one tau."""
    trajectory = None
    if method == "SIMEX":
        trajectory, est = fit_simex_with_trajectory(dataset, tau, **fit_options)
    else:
        est = fit(dataset, method, tau, **fit_options)
    boot = None
    if B > 0:
        boot = bootstrap_ci(
            dataset,
            method,
            tau,
            B,
            level=level,
            rng=np.random.default_rng(seed),
            refit_K=refit_K,
            **fit_options,
        )
    return est, boot, trajectory


def cmd_fit(args) -> int:
    out = _out_dir(args)
    started = _utc_now()
    method = _CANONICAL[args.method.lower()]
    dataset = load_from_config(args.config)
    seed = args.seed if args.seed is not None else _draw_seed()
    tau_seeds = _subseeds(seed, len(args.tau) + 1)

    fit_options = {}
    if method == "Naive":
        fit_options["naive_day"] = args.naive_day
    if method == "FSMI":
        fit_options["fsmi_window"] = args.fsmi_window
    if method == "SIMEX":
        fit_options["simex_config"] = SimexConfig(S=args.simex_draws, rng_seed=tau_seeds[-1])
    if args.dimension is not None:
        fit_options["K"] = args.dimension

    jobs = [
        (dataset, method, tau, fit_options, args.bootstrap, args.level, args.refit_dimension, s)
        for tau, s in zip(args.tau, tau_seeds[: len(args.tau)])
    ]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(_fit_one_tau, *job) for job in jobs]
            fitted = [f.result() for f in futures]
    else:
        fitted = [_fit_one_tau(*job) for job in jobs]

    outputs = []

    estimates = [est for est, _, _ in fitted]
    intervals = {(est.method, est.tau): boot for est, boot, _ in fitted if boot is not None}
    est_path = out / "estimates.csv"
    estimates_to_frame(estimates, intervals or None).to_csv(est_path, index=False)
    outputs.append(est_path)

    grid_path = out / "grid.csv"
    pd.DataFrame({"t": np.asarray(dataset.grid, dtype=float)}).to_csv(grid_path, index=False)
    outputs.append(grid_path)

    if intervals:
        boot_path = out / "bootstrap.csv"
        pd.DataFrame(
            [
                {
                    "method": est.method,
                    "tau": est.tau,
                    "B": boot.B,
                    "level": boot.level,
                    "failures": boot.failures,
                }
                for est, boot, _ in fitted
                if boot is not None
            ]
        ).to_csv(boot_path, index=False)
        outputs.append(boot_path)

    for est, boot, trajectory in fitted:
        tag = _tau_tag(est.tau)
        if trajectory is not None:
            traj_path = out / f"trajectory_tau{tag}.csv"
            trajectory_to_frame(trajectory).to_csv(traj_path, index=False)
            outputs.append(traj_path)
        svg_path = out / f"beta1_tau{tag}.svg"
        lower = upper = None
        if boot is not None:
            lower, upper = boot.beta1_curve
        _svg_curve(
            svg_path,
            dataset.grid,
            est.beta1_curve,
            lower,
            upper,
            title=f"{est.method} functional coefficient, tau={tag}",
        )
        outputs.append(svg_path)

    config_doc = {
        "data_config": str(args.config),
        "method": method,
        "taus": list(args.tau),
        "bootstrap": args.bootstrap,
        "level": args.level,
        "refit_dimension": args.refit_dimension,
        "dimension": args.dimension,
        "naive_day": args.naive_day,
        "fsmi_window": args.fsmi_window,
        "simex_draws": args.simex_draws,
        "jobs": args.jobs,
        "out": str(out),
        "subjects": dataset.n,
        "load_report": dataset.report,
    }
    _write_manifest(out, "fit", config_doc, seed, started, outputs)
    return 0


# ---------------------------------------------------------------------------
# compare


def _read_fit_output(directory):
    """Reload (method, tau) -> EstimateSet from a fit output directory."""
    directory = Path(directory)
    frame = pd.read_csv(directory / "estimates.csv")
    grid = pd.read_csv(directory / "grid.csv")["t"].to_numpy(dtype=float)
    fits = {}
    for (method, tau), sub in frame.groupby(["method", "tau"], sort=False):
        by_target = {t: g for t, g in sub.groupby("target", sort=False)}
        curve_rows = by_target["beta1"].sort_values("grid_index")
        curve = curve_rows["estimate"].to_numpy(dtype=float)
        if curve.size != grid.size:
            raise ValueError(f"{directory}: functional estimate length does not match its grid")
        gammas = []
        j = 1
        while f"gamma{j}" in by_target:
            gammas.append(float(by_target[f"gamma{j}"]["estimate"].iloc[0]))
            j += 1
        # omega and the basis dimension are not serialized; comparison only
        # needs the coefficient curve and scalars
        fits[(method, float(tau))] = EstimateSet(
            method=method,
            tau=float(tau),
            beta0=float(by_target["beta0"]["estimate"].iloc[0]),
            beta1_curve=curve,
            beta2=float(by_target["beta2"]["estimate"].iloc[0]),
            gammas=np.asarray(gammas, dtype=float),
            selected_K=0,
            omega=np.empty(0),
            grid=grid,
        )
    return fits


def cmd_compare(args) -> int:
    out = _out_dir(args)
    started = _utc_now()
    baseline = _read_fit_output(args.naive)
    base_taus = sorted({tau for _, tau in baseline})
    rows = []
    for directory in args.fits:
        fits = _read_fit_output(directory)
        taus = sorted({tau for _, tau in fits})
        if taus != base_taus:
            raise ValueError(
                f"{directory}: quantile levels {taus} do not match the baseline {base_taus}"
            )
        for (method, tau), est in sorted(fits.items(), key=lambda kv: (kv[0][1], kv[0][0])):
            base = next(b for (_, bt), b in baseline.items() if bt == tau)
            functional, scalar = percent_difference(est, base)
            rows.append(
                {
                    "source": str(directory),
                    "method": method,
                    "tau": tau,
                    "functional_pct": functional,
                    "scalar_pct": scalar,
                }
            )

    table_path = out / "percent_differences.csv"
    pd.DataFrame(rows).to_csv(table_path, index=False)
    config_doc = {
        "naive": str(args.naive),
        "fits": [str(d) for d in args.fits],
        "out": str(out),
    }
    _write_manifest(out, "compare", config_doc, None, started, [table_path])
    return 0


# ---------------------------------------------------------------------------
# parser


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fqme",
        description="Quantile regression for error-prone functional and scalar covariates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a simulation study and write metrics tables")
    group = sim.add_mutually_exclusive_group(required=True)
    group.add_argument("--study", type=int, choices=range(1, 7), help="preset study id")
    group.add_argument("--config", help="JSON file of simulation conditions")
    sim.add_argument("--replicates", type=int, help="Monte-Carlo replicates per condition")
    sim.add_argument("--seed", type=int, help="root seed (drawn and recorded when omitted)")
    sim.add_argument("--taus", type=float, nargs="+", help="quantile levels to fit")
    sim.add_argument("--out", default=".", help="output directory")
    sim.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="parallel replicate fits")
    sim.add_argument(
        "--full",
        action="store_true",
        help="full-scale run: 500 replicates per condition regardless of --replicates",
    )
    sim.set_defaults(func=cmd_simulate)

    fit_p = sub.add_parser("fit", help="fit one estimator to a dataset described by a config")
    fit_p.add_argument("config", help="JSON data config naming the three CSV files")
    fit_p.add_argument(
        "--method",
        required=True,
        type=str.lower,
        choices=sorted(_CANONICAL),
        help="estimator to fit",
    )
    fit_p.add_argument("--tau", type=float, nargs="+", default=[0.5], help="quantile levels")
    fit_p.add_argument("--bootstrap", type=int, default=0, help="bootstrap replicates (0 = none)")
    fit_p.add_argument("--level", type=float, default=0.95, help="confidence level")
    fit_p.add_argument(
        "--refit-dimension",
        action="store_true",
        help="reselect the basis dimension inside each bootstrap replicate",
    )
    fit_p.add_argument("--dimension", type=int, help="fix the basis dimension instead of selecting")
    fit_p.add_argument("--naive-day", type=int, default=1, help="observation day for the naive fit")
    fit_p.add_argument("--fsmi-window", type=int, default=5, help="FSMI pooling window (odd)")
    fit_p.add_argument("--simex-draws", type=int, default=100, help="SIMEX inner repetitions")
    fit_p.add_argument("--seed", type=int, help="root seed (drawn and recorded when omitted)")
    fit_p.add_argument("--out", default=".", help="output directory")
    fit_p.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="parallel tau fits")
    fit_p.set_defaults(func=cmd_fit)

    cmp_p = sub.add_parser("compare", help="percent differences of fits against a baseline fit")
    cmp_p.add_argument("fits", nargs="+", help="fit output directories to compare")
    cmp_p.add_argument("--naive", required=True, help="baseline fit output directory")
    cmp_p.add_argument("--out", default=".", help="output directory")
    cmp_p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING)
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MissingTruth as exc:
        print(f"error: MissingTruth: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
