import math

import numpy as np
import pandas as pd
import pytest

from sparsebench.schemas.experiment import DatasetKind, ModelKind, ResultRow
from sparsebench.services.report import REPORT_TABLES, aggregate, build_reports, write_reports


def _row(model=ModelKind.LASSO, dataset=DatasetKind.BLOCK, **fields):
    base = dict(dataset=dataset, model=model, rho=0.3, snr=2.0, p=20, seed=42)
    base.update(fields)
    return ResultRow(**base)


def test_mean_and_sample_std():
    rows = [_row(test_mse=1.0, seed=1), _row(test_mse=3.0, seed=2)]
    table = aggregate(rows, ["model"], ["test_mse"])
    assert table.loc[0, "test_mse_mean"] == 2.0
    assert table.loc[0, "test_mse_std"] == pytest.approx(math.sqrt(2.0))
    assert table.loc[0, "n"] == 2


def test_single_row_std_is_zero():
    table = aggregate([_row(test_mse=5.0)], ["model"], ["test_mse"])
    assert table.loc[0, "test_mse_std"] == 0.0


def test_missing_metric_stays_empty():
    table = aggregate([_row(model=ModelKind.OLS, test_mse=1.0)], ["model"], ["coverage"])
    assert pd.isna(table.loc[0, "coverage_mean"])


def test_failed_rows_excluded():
    rows = [_row(test_mse=1.0), _row(test_mse=None, error="SamplerAbort: diverged", seed=7)]
    table = aggregate(rows, ["model"], ["test_mse"])
    assert table.loc[0, "n"] == 1


def test_canonical_cell_order():
    rows = [
        _row(model=ModelKind.SPIKE_SLAB, test_mse=1.0),
        _row(model=ModelKind.OLS, rho=0.9, test_mse=1.0),
        _row(model=ModelKind.OLS, rho=0.0, test_mse=1.0),
        _row(model=ModelKind.RIDGE, test_mse=1.0),
    ]
    table = aggregate(rows, ["model", "rho"], ["test_mse"])
    assert list(zip(table["model"], table["rho"])) == [
        ("ols", 0.0),
        ("ols", 0.9),
        ("ridge", 0.3),
        ("spike_slab", 0.3),
    ]


def test_permutation_invariant():
    rng = np.random.default_rng(1)
    rows = [
        _row(model=list(ModelKind)[i % 6], seed=i, test_mse=float(rng.gamma(2.0)), f1=float(rng.uniform()))
        for i in range(60)
    ]
    shuffled = [rows[i] for i in rng.permutation(len(rows))]
    a = aggregate(rows, ["model", "snr"], ["test_mse", "f1"])
    b = aggregate(shuffled, ["model", "snr"], ["test_mse", "f1"])
    pd.testing.assert_frame_equal(a, b, check_exact=True)


def test_unknown_axis():
    with pytest.raises(ValueError):
        aggregate([_row()], ["colour"], ["test_mse"])


def test_report_tables_split_synthetic_and_real():
    rows = [
        _row(model=ModelKind.HORSESHOE, test_mse=1.0, coverage=0.9, interval_width=1.0),
        _row(model=ModelKind.OLS, dataset=DatasetKind.DIABETES, rho=0.0, snr=0.0, p=10, test_mse=0.5),
    ]
    tables = build_reports(rows)
    assert list(tables["summary_by_model.csv"]["model"]) == ["horseshoe"]
    assert list(tables["calibration.csv"]["model"]) == ["horseshoe"]
    assert list(tables["diabetes.csv"]["model"]) == ["ols"]


def test_write_reports(tmp_path):
    rows = [_row(model=m, test_mse=1.0, f1=0.5, fit_time_s=0.1) for m in ModelKind]
    written = write_reports(rows, tmp_path / "reports")
    names = {path.name for path in written}
    assert {table.filename for table in REPORT_TABLES} <= names
    assert {"diabetes.csv", "l2_by_p.csv", "mse_by_snr.csv"} <= names
    summary = pd.read_csv(tmp_path / "reports" / "summary_by_model.csv")
    assert list(summary["model"]) == [m.value for m in ModelKind]


def test_write_main_tables_only(tmp_path):
    written = write_reports([_row(test_mse=1.0)], tmp_path, supplementary=False)
    assert len(written) == 7


def test_mse_by_rho_split_by_design():
    rows = [
        _row(dataset=DatasetKind.BLOCK, test_mse=1.0),
        _row(dataset=DatasetKind.TOEPLITZ, test_mse=3.0),
        _row(dataset=DatasetKind.INDEPENDENT, rho=0.0, test_mse=9.0),
    ]
    table = build_reports(rows)["mse_by_rho_design.csv"]
    assert list(zip(table["dataset"], table["rho"], table["test_mse_mean"])) == [
        ("block", 0.3, 1.0),
        ("toeplitz", 0.3, 3.0),
    ]
    pooled = build_reports(rows)["mse_by_rho.csv"]
    assert list(pooled["rho"]) == [0.0, 0.3]


def test_seed_stability_one_line_per_seed():
    rows = [
        _row(model=ModelKind.HORSESHOE, seed=42, snr=1.0, test_mse=1.0),
        _row(model=ModelKind.HORSESHOE, seed=42, snr=2.0, test_mse=3.0),
        _row(model=ModelKind.HORSESHOE, seed=123, snr=1.0, test_mse=5.0),
        _row(model=ModelKind.OLS, seed=42, test_mse=2.0),
    ]
    table = build_reports(rows)["seed_stability.csv"]
    assert list(zip(table["model"], table["seed"])) == [("ols", 42), ("horseshoe", 42), ("horseshoe", 123)]
    assert list(table["n"]) == [1, 2, 1]
    assert list(table["test_mse_mean"]) == [2.0, 2.0, 5.0]
