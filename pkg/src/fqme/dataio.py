"""CSV ingestion of multi-day functional and replicated scalar data.

Three long-format files describe a study: functional rows (subject_id,
day, t, value), scalar replicate rows (subject_id, replicate, value), and
one covariate row per subject (subject_id, response, optional weight, then
covariate columns).  Loading pivots curves, enforces completeness and
inclusion rules with a per-rule count report, and rescales the grid to
[0, 1].
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd


class RowIntegrityError(ValueError):
    """A retained day is missing grid cells; ``cells`` lists (subject, day, t)."""

    def __init__(self, message, cells):
        super().__init__(message)
        self.cells = cells


class DuplicateKeyError(ValueError):
    """The same key row appears more than once in an input file."""


class ParseError(ValueError):
    """A field failed numeric parsing; message carries file and line number."""


@dataclass
class FunctionalDataset:
    """Validated application data ready for the estimator pipeline.

    W1 is a list of per-subject (J_i, T) day curves, W2 a list of
    per-subject replicate vectors; both may be ragged across subjects.
    ``report`` holds the loader's inclusion-rule counts.
    """

    subjects: list
    grid: np.ndarray
    W1: list
    W2: list
    Z: np.ndarray
    Y: np.ndarray
    weights: np.ndarray
    days: list = field(default_factory=list)
    report: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.subjects)


def _read(path, required):
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise ParseError(f"{path}: missing required columns {missing}")
    return frame


def _numeric(frame, column, path):
    converted = pd.to_numeric(frame[column], errors="coerce")
    bad = converted.index[converted.isna()]
    if len(bad):
        line = int(bad[0]) + 2  # header is line 1
        raise ParseError(
            f"{path}:{line}: non-numeric value {frame[column].iloc[bad[0]]!r} in column {column!r}"
        )
    # numpy's parser is correctly rounded, so written repr values reload bitwise
    return frame[column].to_numpy(dtype=np.float64)


def _sort_ids(ids):
    """Numeric-aware deterministic ordering of subject/day identifiers."""
    try:
        return sorted(ids, key=lambda s: (0, float(s)))
    except (TypeError, ValueError):
        return sorted(ids, key=str)


def load_csv(
    functional,
    scalar,
    covariates,
    min_days: int = 2,
    min_replicates: int = 2,
    on_incomplete_day: str = "drop",
    expected_grid_size=None,
) -> FunctionalDataset:
    """Load and validate the three CSV files into a FunctionalDataset.

    Incomplete days (missing grid cells) are dropped and counted by
    default; ``on_incomplete_day="error"`` raises RowIntegrityError listing
    the missing (subject, day, t) cells instead.  Subjects are dropped by
    the first failing rule among min_days, missing_scalar, min_replicates,
    missing_covariates; ``report["dropped"]`` counts each.
    """
    if on_incomplete_day not in ("drop", "error"):
        raise ValueError("on_incomplete_day must be 'drop' or 'error'")

    func = _read(functional, ("subject_id", "day", "t", "value"))
    func = func.assign(
        _t=_numeric(func, "t", functional), _v=_numeric(func, "value", functional)
    )
    dup = func.duplicated(["subject_id", "day", "t"])
    if dup.any():
        row = func[dup].iloc[0]
        raise DuplicateKeyError(
            f"{functional}: duplicate functional row for subject {row['subject_id']!r}, "
            f"day {row['day']!r}, t {row['t']!r}"
        )
    grid_raw = np.array(sorted(func["_t"].unique()))
    if expected_grid_size is not None and grid_raw.size != expected_grid_size:
        raise RowIntegrityError(
            f"{functional}: grid has {grid_raw.size} points, expected {expected_grid_size}",
            [],
        )
    if grid_raw.size < 2:
        raise ValueError("functional grid needs at least 2 distinct t values")
    span = grid_raw[-1] - grid_raw[0]
    grid = (grid_raw - grid_raw[0]) / span

    scal = _read(scalar, ("subject_id", "replicate", "value"))
    scal = scal.assign(_v=_numeric(scal, "value", scalar))
    dup = scal.duplicated(["subject_id", "replicate"])
    if dup.any():
        row = scal[dup].iloc[0]
        raise DuplicateKeyError(
            f"{scalar}: duplicate scalar row for subject {row['subject_id']!r}, "
            f"replicate {row['replicate']!r}"
        )

    cov = _read(covariates, ("subject_id", "response"))
    dup = cov.duplicated(["subject_id"])
    if dup.any():
        raise DuplicateKeyError(
            f"{covariates}: duplicate covariate row for subject "
            f"{cov[dup].iloc[0]['subject_id']!r}"
        )
    cov_cols = [c for c in cov.columns if c not in ("subject_id", "response", "weight")]
    cov_numeric = {c: _numeric(cov, c, covariates) for c in ("response", *cov_cols)}
    weight_vec = (
        _numeric(cov, "weight", covariates) if "weight" in cov.columns else np.ones(len(cov))
    )
    cov_index = {sid: i for i, sid in enumerate(cov["subject_id"])}

    # pivot curves; track incomplete days
    t_positions = {t: i for i, t in enumerate(grid_raw)}
    curves = {}
    incomplete_days = 0
    missing_cells = []
    for (sid, day), block in func.groupby(["subject_id", "day"], sort=False):
        present = set(block["_t"])
        if len(present) != grid_raw.size:
            incomplete_days += 1
            missing_cells.extend(
                (sid, day, t) for t in grid_raw if t not in present
            )
            continue
        row = np.empty(grid_raw.size)
        row[[t_positions[t] for t in block["_t"]]] = block["_v"].to_numpy()
        curves.setdefault(sid, {})[day] = row
    if missing_cells and on_incomplete_day == "error":
        head = ", ".join(f"({s!r}, {d!r}, {t:g})" for s, d, t in missing_cells[:5])
        raise RowIntegrityError(
            f"{functional}: {len(missing_cells)} missing grid cells, first: {head}",
            missing_cells,
        )

    scalars = {sid: block for sid, block in scal.groupby("subject_id", sort=False)}

    dropped = {"min_days": 0, "missing_scalar": 0, "min_replicates": 0, "missing_covariates": 0}
    subjects, W1, W2, days = [], [], [], []
    all_ids = _sort_ids(func["subject_id"].unique())
    for sid in all_ids:
        sub_curves = curves.get(sid, {})
        if len(sub_curves) < min_days:
            dropped["min_days"] += 1
            continue
        if sid not in scalars:
            dropped["missing_scalar"] += 1
            continue
        block = scalars[sid]
        if len(block) < min_replicates:
            dropped["min_replicates"] += 1
            continue
        if sid not in cov_index:
            dropped["missing_covariates"] += 1
            continue
        ordered_days = _sort_ids(sub_curves.keys())
        subjects.append(sid)
        days.append(list(ordered_days))
        W1.append(np.vstack([sub_curves[d] for d in ordered_days]))
        labels = list(block["replicate"])
        try:
            keys = [float(r) for r in labels]
        except (TypeError, ValueError):
            keys = [str(r) for r in labels]
        order = np.argsort(keys, kind="stable")
        W2.append(block["_v"].to_numpy()[order])

    idx = [cov_index[sid] for sid in subjects]
    Z = (
        np.column_stack([cov_numeric[c][idx] for c in cov_cols])
        if cov_cols
        else np.empty((len(subjects), 0))
    )
    report = {
        "input_subjects": len(all_ids),
        "retained_subjects": len(subjects),
        "dropped": dropped,
        "incomplete_days": incomplete_days,
        "grid_size": int(grid_raw.size),
        "covariate_columns": cov_cols,
    }
    return FunctionalDataset(
        subjects=subjects,
        grid=grid,
        W1=W1,
        W2=W2,
        Z=Z,
        Y=cov_numeric["response"][idx],
        weights=weight_vec[idx],
        days=days,
        report=report,
    )


def outlier_filter(dataset: FunctionalDataset, multiplier: float, per_subject: bool = False, min_days: int = 2):
    """Drop days containing functional values above Q3 + multiplier*IQR.

    Quartiles are type-7 over all retained functional values (or per
    subject); the comparison is strict.  Subjects falling below
    ``min_days`` complete days afterwards are dropped.  Returns
    (filtered dataset, report).
    """
    if multiplier <= 0:
        raise ValueError("multiplier must be positive")

    def threshold(values):
        q1, q3 = np.quantile(values, [0.25, 0.75])
        return q3 + multiplier * (q3 - q1)

    global_thr = None
    if not per_subject and not math.isinf(multiplier):
        global_thr = threshold(np.concatenate([w.ravel() for w in dataset.W1]))

    subjects, W1, W2, days = [], [], [], []
    keep_idx = []
    removed_days = 0
    dropped_subjects = 0
    for i, curves in enumerate(dataset.W1):
        if math.isinf(multiplier):
            keep = np.ones(curves.shape[0], dtype=bool)
        else:
            thr = global_thr if global_thr is not None else threshold(curves.ravel())
            keep = ~(curves > thr).any(axis=1)
        removed_days += int((~keep).sum())
        if keep.sum() < min_days:
            dropped_subjects += 1
            continue
        keep_idx.append(i)
        subjects.append(dataset.subjects[i])
        W1.append(curves[keep])
        W2.append(dataset.W2[i])
        days.append(
            [d for d, k in zip(dataset.days[i], keep) if k] if dataset.days else []
        )
    report = {
        "removed_days": removed_days,
        "dropped_subjects": dropped_subjects,
        "threshold": None if global_thr is None else float(global_thr),
    }
    filtered = FunctionalDataset(
        subjects=subjects,
        grid=dataset.grid,
        W1=W1,
        W2=W2,
        Z=dataset.Z[keep_idx],
        Y=dataset.Y[keep_idx],
        weights=dataset.weights[keep_idx],
        days=days,
        report={**dataset.report, "outlier_filter": report},
    )
    return filtered, report


def save_csv(dataset, functional, scalar, covariates, covariate_names=None):
    """Serialize a dataset (simulated or loaded) to the three-file layout.

    Floats are written at full precision so reloading reproduces the
    arrays bitwise.  Works for any object with W1/W2/Z/Y/grid attributes;
    subject ids default to 1..n.
    """
    W1 = dataset.W1
    n = len(W1) if isinstance(W1, list) else W1.shape[0]
    ids = getattr(dataset, "subjects", None) or list(range(1, n + 1))
    grid = np.asarray(dataset.grid, dtype=float)

    rows = []
    for i in range(n):
        curves = W1[i]
        for j in range(curves.shape[0]):
            for k in range(grid.size):
                rows.append((ids[i], j + 1, grid[k], curves[j, k]))
    pd.DataFrame(rows, columns=["subject_id", "day", "t", "value"]).to_csv(
        functional, index=False
    )

    rows = []
    W2 = dataset.W2
    for i in range(n):
        vals = W2[i] if isinstance(W2, list) else W2[i, :]
        for l, v in enumerate(np.asarray(vals, dtype=float)):
            rows.append((ids[i], l + 1, v))
    pd.DataFrame(rows, columns=["subject_id", "replicate", "value"]).to_csv(
        scalar, index=False
    )

    Z = np.asarray(dataset.Z, dtype=float)
    if Z.ndim == 1:
        Z = Z.reshape(n, 1)
    names = covariate_names or [f"z{j + 1}" for j in range(Z.shape[1])]
    frame = pd.DataFrame({"subject_id": ids, "response": np.asarray(dataset.Y, dtype=float)})
    w = getattr(dataset, "weights", None)
    if w is not None:
        frame["weight"] = np.asarray(w, dtype=float)
    for j, name in enumerate(names):
        frame[name] = Z[:, j]
    frame.to_csv(covariates, index=False)


def aggregate_functional(frame: pd.DataFrame, bins: dict) -> pd.DataFrame:
    """Average long-format functional rows into declared bins.

    ``bins`` maps a bin label to the list of t values it covers; a
    (subject, day, bin) average is emitted only when every member t is
    present (the completeness rule applied at bin level).
    """
    t_to_bin = {}
    sizes = {}
    for label, members in bins.items():
        sizes[label] = len(members)
        for t in members:
            t_to_bin[float(t)] = label
    work = frame.copy()
    work["t"] = pd.to_numeric(work["t"])
    work["value"] = pd.to_numeric(work["value"])
    work["_bin"] = work["t"].map(t_to_bin)
    work = work.dropna(subset=["_bin"])
    out = []
    for (sid, day, label), block in work.groupby(["subject_id", "day", "_bin"], sort=False):
        if block["t"].nunique() == sizes[label]:
            out.append((sid, day, label, block["value"].mean()))
    return pd.DataFrame(out, columns=["subject_id", "day", "t", "value"])


def load_from_config(path):
    """Load a dataset as described by a JSON config document.

    Keys: functional, scalar, covariates (paths, resolved relative to the
    config file); optional min_days, min_replicates, on_incomplete_day,
    expected_grid_size, iqr_multiplier, per_subject_iqr.
    """
    path = Path(path)
    with open(path) as fh:
        doc = json.load(fh)
    base = path.parent

    def resolve(name):
        p = Path(doc[name])
        return p if p.is_absolute() else base / p

    dataset = load_csv(
        resolve("functional"),
        resolve("scalar"),
        resolve("covariates"),
        min_days=int(doc.get("min_days", 2)),
        min_replicates=int(doc.get("min_replicates", 2)),
        on_incomplete_day=doc.get("on_incomplete_day", "drop"),
        expected_grid_size=doc.get("expected_grid_size"),
    )
    if doc.get("iqr_multiplier") is not None:
        dataset, _ = outlier_filter(
            dataset,
            float(doc["iqr_multiplier"]),
            per_subject=bool(doc.get("per_subject_iqr", False)),
            min_days=int(doc.get("min_days", 2)),
        )
    return dataset
