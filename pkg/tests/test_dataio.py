"""Tests for CSV ingestion, inclusion rules, filtering, and round-trips."""

import json
import types

import numpy as np
import pandas as pd
import pytest

from fqme.dataio import (
    DuplicateKeyError,
    FunctionalDataset,
    ParseError,
    RowIntegrityError,
    aggregate_functional,
    load_csv,
    load_from_config,
    outlier_filter,
    save_csv,
)


def _functional_rows(per_subject):
    """per_subject: {sid: {day: {t: value}}} rendered as CSV text."""
    lines = ["subject_id,day,t,value"]
    for sid, days in per_subject.items():
        for day, cells in days.items():
            for t, v in cells.items():
                lines.append(f"{sid},{day},{t},{v}")
    return "\n".join(lines) + "\n"


def _scalar_rows(per_subject):
    lines = ["subject_id,replicate,value"]
    for sid, reps in per_subject.items():
        for rep, v in reps:
            lines.append(f"{sid},{rep},{v}")
    return "\n".join(lines) + "\n"


def _cov_rows(rows, header="subject_id,response,z1"):
    return header + "\n" + "\n".join(",".join(str(x) for x in r) for r in rows) + "\n"


def _complete(sid, n_days=2, ts=(0.0, 0.5, 1.0), base=0.0):
    return {d: {t: base + d + t for t in ts} for d in range(1, n_days + 1)}


def _write(tmp_path, func_text, scal_text, cov_text):
    f = tmp_path / "func.csv"
    s = tmp_path / "scal.csv"
    c = tmp_path / "cov.csv"
    f.write_text(func_text)
    s.write_text(scal_text)
    c.write_text(cov_text)
    return f, s, c


def test_save_load_roundtrip_is_bitwise():
    rng = np.random.default_rng(0)
    n, J, L, T = 7, 3, 2, 11
    data = types.SimpleNamespace(
        W1=rng.standard_normal((n, J, T)) * 1e3,
        W2=rng.standard_normal((n, L)),
        Z=rng.standard_normal((n, 2)),
        Y=rng.standard_normal(n),
        grid=np.linspace(0.0, 1.0, T),
    )
    import tempfile, pathlib

    with tempfile.TemporaryDirectory() as d:
        d = pathlib.Path(d)
        save_csv(data, d / "f.csv", d / "s.csv", d / "c.csv")
        loaded = load_csv(d / "f.csv", d / "s.csv", d / "c.csv")
    assert loaded.n == n
    assert np.array_equal(loaded.grid, data.grid)
    for i in range(n):
        assert np.array_equal(loaded.W1[i], data.W1[i])
        assert np.array_equal(loaded.W2[i], data.W2[i])
    assert np.array_equal(loaded.Z, data.Z)
    assert np.array_equal(loaded.Y, data.Y)
    assert np.array_equal(loaded.weights, np.ones(n))
    assert loaded.report["retained_subjects"] == n


def test_inclusion_rules_count_first_failure(tmp_path):
    func = {
        1: _complete(1),
        2: {1: {0.0: 1.0, 0.5: 1.0, 1.0: 1.0}},  # one day only
        3: _complete(3),  # no scalar rows
        4: _complete(4),  # one replicate only
        5: _complete(5),  # no covariate row
        6: {1: {0.0: 1.0, 0.5: 1.0, 1.0: 1.0}},  # fails min_days before missing_scalar
    }
    scal = {
        1: [(1, 2.0), (2, 2.5)],
        2: [(1, 2.0), (2, 2.5)],
        4: [(1, 2.0)],
        5: [(1, 2.0), (2, 2.5)],
    }
    cov = [(1, 10.0, 0.3), (2, 11.0, 0.1), (3, 12.0, 0.2), (4, 13.0, 0.4)]
    paths = _write(tmp_path, _functional_rows(func), _scalar_rows(scal), _cov_rows(cov))
    loaded = load_csv(*paths)
    assert loaded.subjects == ["1"]
    report = loaded.report
    assert report["input_subjects"] == 6
    assert report["retained_subjects"] == 1
    assert report["dropped"] == {
        "min_days": 2,
        "missing_scalar": 1,
        "min_replicates": 1,
        "missing_covariates": 1,
    }
    assert sum(report["dropped"].values()) == 6 - 1


def test_incomplete_day_dropped_or_fatal(tmp_path):
    func = {1: _complete(1, n_days=3)}
    del func[1][2][0.5]  # day 2 loses its middle cell
    scal = {1: [(1, 2.0), (2, 2.1)]}
    cov = [(1, 10.0, 0.3)]
    paths = _write(tmp_path, _functional_rows(func), _scalar_rows(scal), _cov_rows(cov))
    loaded = load_csv(*paths)
    assert loaded.W1[0].shape == (2, 3)
    assert loaded.days[0] == ["1", "3"]
    assert loaded.report["incomplete_days"] == 1

    with pytest.raises(RowIntegrityError) as err:
        load_csv(*paths, on_incomplete_day="error")
    assert err.value.cells == [("1", "2", 0.5)]


def test_duplicate_keys_rejected_per_file(tmp_path):
    base_func = _functional_rows({1: _complete(1)})
    base_scal = _scalar_rows({1: [(1, 2.0), (2, 2.1)]})
    base_cov = _cov_rows([(1, 10.0, 0.3)])

    dup_func = base_func + "1,1,0.0,9.9\n"
    paths = _write(tmp_path, dup_func, base_scal, base_cov)
    with pytest.raises(DuplicateKeyError, match="duplicate functional"):
        load_csv(*paths)

    dup_scal = base_scal + "1,2,9.9\n"
    paths = _write(tmp_path, base_func, dup_scal, base_cov)
    with pytest.raises(DuplicateKeyError, match="duplicate scalar"):
        load_csv(*paths)

    dup_cov = base_cov + "1,11.0,0.5\n"
    paths = _write(tmp_path, base_func, base_scal, dup_cov)
    with pytest.raises(DuplicateKeyError, match="duplicate covariate"):
        load_csv(*paths)


def test_parse_errors_carry_one_based_line_numbers(tmp_path):
    func_text = _functional_rows({1: _complete(1)})
    lines = func_text.splitlines()
    lines[3] = lines[3].rsplit(",", 1)[0] + ",oops"  # data row 3 -> file line 4
    paths = _write(
        tmp_path,
        "\n".join(lines) + "\n",
        _scalar_rows({1: [(1, 2.0), (2, 2.1)]}),
        _cov_rows([(1, 10.0, 0.3)]),
    )
    with pytest.raises(ParseError, match=r":4: non-numeric value 'oops'"):
        load_csv(*paths)

    headerless = "subject_id,day,t\n1,1,0.0\n"
    paths = _write(
        tmp_path, headerless, _scalar_rows({1: [(1, 2.0), (2, 2.1)]}), _cov_rows([(1, 10.0, 0.3)])
    )
    with pytest.raises(ParseError, match=r"missing required columns \['value'\]"):
        load_csv(*paths)

    bad_cov = _cov_rows([(1, "ten", 0.3)])
    paths = _write(
        tmp_path,
        _functional_rows({1: _complete(1)}),
        _scalar_rows({1: [(1, 2.0), (2, 2.1)]}),
        bad_cov,
    )
    with pytest.raises(ParseError, match="'ten'"):
        load_csv(*paths)


def test_grid_rescaled_to_unit_interval(tmp_path):
    func = {1: _complete(1, ts=(2.0, 4.0, 6.0))}
    paths = _write(
        tmp_path,
        _functional_rows(func),
        _scalar_rows({1: [(1, 2.0), (2, 2.1)]}),
        _cov_rows([(1, 10.0, 0.3)]),
    )
    loaded = load_csv(*paths)
    assert np.array_equal(loaded.grid, [0.0, 0.5, 1.0])
    assert loaded.report["grid_size"] == 3

    with pytest.raises(RowIntegrityError, match="expected 4"):
        load_csv(*paths, expected_grid_size=4)


def test_replicate_and_day_ordering_is_numeric_aware(tmp_path):
    func = {1: {d: {0.0: float(d), 1.0: float(d)} for d in (10, 2, 1)}}
    scal = {1: [(10, 30.0), (2, 20.0), (1, 10.0)]}
    paths = _write(
        tmp_path, _functional_rows(func), _scalar_rows(scal), _cov_rows([(1, 10.0, 0.3)])
    )
    loaded = load_csv(*paths)
    assert loaded.days[0] == ["1", "2", "10"]
    assert np.array_equal(loaded.W1[0][:, 0], [1.0, 2.0, 10.0])
    assert np.array_equal(loaded.W2[0], [10.0, 20.0, 30.0])

    # non-numeric labels fall back to string order
    func_s = {1: {d: {0.0: 1.0, 1.0: 1.0} for d in ("b", "a")}}
    scal_s = {1: [("b", 2.0), ("a", 1.0)]}
    paths = _write(
        tmp_path, _functional_rows(func_s), _scalar_rows(scal_s), _cov_rows([(1, 10.0, 0.3)])
    )
    loaded = load_csv(*paths)
    assert loaded.days[0] == ["a", "b"]
    assert np.array_equal(loaded.W2[0], [1.0, 2.0])


def test_weight_column_passthrough(tmp_path):
    cov = _cov_rows(
        [(1, 10.0, 2.5, 0.3), (2, 11.0, 1.5, 0.4)],
        header="subject_id,response,weight,z1",
    )
    func = {1: _complete(1), 2: _complete(2)}
    scal = {1: [(1, 2.0), (2, 2.1)], 2: [(1, 3.0), (2, 3.1)]}
    paths = _write(tmp_path, _functional_rows(func), _scalar_rows(scal), cov)
    loaded = load_csv(*paths)
    assert np.array_equal(loaded.weights, [2.5, 1.5])
    assert loaded.report["covariate_columns"] == ["z1"]
    assert loaded.Z.shape == (2, 1)


def _toy_dataset(W1_list):
    n = len(W1_list)
    return FunctionalDataset(
        subjects=[str(i + 1) for i in range(n)],
        grid=np.linspace(0.0, 1.0, W1_list[0].shape[1]),
        W1=[np.asarray(w, dtype=float) for w in W1_list],
        W2=[np.array([1.0, 2.0])] * n,
        Z=np.arange(n, dtype=float).reshape(n, 1),
        Y=np.arange(n, dtype=float) + 10.0,
        weights=np.ones(n),
        days=[[str(j + 1) for j in range(w.shape[0])] for w in W1_list],
        report={},
    )


def test_outlier_filter_global_threshold_strict():
    # pooled: 0,0,1,1,2,2,2,4,5,5,5,6,8,10,100 -> q1=1.5, q3=5.5, thr=11.5
    quiet = np.array([[0.0, 2.0, 4.0], [6.0, 8.0, 10.0], [5.0, 5.0, 5.0]])
    spiky = np.array([[1.0, 2.0, 100.0], [0.0, 1.0, 2.0]])
    data = _toy_dataset([quiet, spiky])

    filtered, report = outlier_filter(data, 1.5)
    assert report["threshold"] == 11.5
    assert report["removed_days"] == 1
    # losing the spiky day leaves subject 2 under min_days
    assert report["dropped_subjects"] == 1
    assert filtered.subjects == ["1"]
    assert filtered.W1[0].shape == (3, 3)
    assert np.array_equal(filtered.Z, [[0.0]])
    assert np.array_equal(filtered.Y, [10.0])
    assert "outlier_filter" in filtered.report

    relaxed, report = outlier_filter(data, 1.5, min_days=1)
    assert report["dropped_subjects"] == 0
    assert relaxed.W1[1].shape == (1, 3)
    assert relaxed.days[1] == ["2"]


def test_outlier_filter_boundary_day_is_kept():
    # eleven 4.0 cells and one 4.5: q1 = q3 = threshold = 4.0 exactly, so
    # days sitting on the threshold survive the strict comparison
    flat = np.full((2, 3), 4.0)
    mixed = np.array([[4.0, 4.0, 4.0], [4.0, 4.0, 4.5]])
    data = _toy_dataset([flat, mixed])
    filtered, report = outlier_filter(data, 3.0, min_days=1)
    assert report["threshold"] == 4.0
    assert filtered.W1[0].shape == (2, 3)
    assert filtered.W1[1].shape == (1, 3)
    assert report["removed_days"] == 1
    assert report["dropped_subjects"] == 0


def test_outlier_filter_subject_drop_and_alignment():
    quiet = np.zeros((2, 3))
    doomed = np.array([[100.0, 0.0, 0.0], [0.0, 100.0, 0.0]])
    data = _toy_dataset([quiet, doomed])
    filtered, report = outlier_filter(data, 1.5)
    assert report["dropped_subjects"] == 1
    assert filtered.subjects == ["1"]
    assert np.array_equal(filtered.Z, [[0.0]])
    assert np.array_equal(filtered.Y, [10.0])
    assert len(filtered.W2) == 1


def test_outlier_filter_inf_and_per_subject_modes():
    data = _toy_dataset([np.zeros((2, 3)), np.array([[0.0, 0.0, 1e6], [0.0, 0.0, 0.0]])])
    same, report = outlier_filter(data, float("inf"))
    assert report == {"removed_days": 0, "dropped_subjects": 0, "threshold": None}
    assert [w.shape for w in same.W1] == [(2, 3), (2, 3)]

    per_subject, report = outlier_filter(data, 1.5, per_subject=True, min_days=1)
    assert report["threshold"] is None  # no single global threshold exists
    assert per_subject.W1[1].shape == (1, 3)

    with pytest.raises(ValueError, match="multiplier"):
        outlier_filter(data, 0.0)


def test_aggregate_functional_respects_bin_completeness():
    frame = pd.DataFrame(
        {
            "subject_id": ["1"] * 4 + ["2"] * 3,
            "day": ["1"] * 4 + ["1"] * 3,
            "t": ["1", "2", "3", "4", "1", "2", "3"],
            "value": ["10", "20", "30", "50", "1", "3", "7"],
        }
    )
    bins = {"lo": [1.0, 2.0], "hi": [3.0, 4.0]}
    out = aggregate_functional(frame, bins)
    got = {(r.subject_id, r.day, r.t): r.value for r in out.itertuples()}
    assert got[("1", "1", "lo")] == pytest.approx(15.0)
    assert got[("1", "1", "hi")] == pytest.approx(40.0)
    assert got[("2", "1", "lo")] == pytest.approx(2.0)
    assert ("2", "1", "hi") not in got  # t=4 missing, bin incomplete


def test_load_from_config_resolves_paths_and_filters(tmp_path):
    func = {
        1: _complete(1),
        2: {1: {0.0: 1.0, 0.5: 1.0, 1.0: 500.0}, 2: {0.0: 1.0, 0.5: 1.0, 1.0: 1.0}},
    }
    scal = {1: [(1, 2.0), (2, 2.1)], 2: [(1, 3.0), (2, 3.1)]}
    cov = [(1, 10.0, 0.3), (2, 11.0, 0.4)]
    _write(tmp_path, _functional_rows(func), _scalar_rows(scal), _cov_rows(cov))
    config = {
        "functional": "func.csv",
        "scalar": "scal.csv",
        "covariates": "cov.csv",
        "min_days": 1,
        "expected_grid_size": 3,
        "iqr_multiplier": 1.5,
    }
    cfg_path = tmp_path / "study.json"
    cfg_path.write_text(json.dumps(config))
    loaded = load_from_config(cfg_path)
    assert loaded.subjects == ["1", "2"]
    # the spiky day of subject 2 fell to the outlier rule
    assert loaded.W1[1].shape == (1, 3)
    assert loaded.report["outlier_filter"]["removed_days"] == 1

    plain = dict(config)
    del plain["iqr_multiplier"]
    cfg_path.write_text(json.dumps(plain))
    assert load_from_config(cfg_path).W1[1].shape == (2, 3)
