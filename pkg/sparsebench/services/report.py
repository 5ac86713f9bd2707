"""
Aggregate result rows into the summary tables (mean and sample std per cell).
"""

import logging
from pathlib import Path
from typing import Callable, Dict, List, NamedTuple, Sequence, Union

import numpy as np
import pandas as pd

from sparsebench.core.exceptions import StorageError
from sparsebench.schemas.experiment import DATASET_ORDER, MODEL_ORDER, DatasetKind, ResultRow

logger = logging.getLogger(__name__)

GROUP_AXES = ("dataset", "model", "rho", "snr", "p", "seed")


def _mean_std(values: List[float]):
    if not values:
        return None, None
    ordered = np.sort(np.asarray(values, dtype=float))
    mean = float(np.mean(ordered))
    std = float(np.std(ordered, ddof=1)) if ordered.shape[0] > 1 else 0.0
    return mean, std


def _axis_rank(axis: str, value):
    if axis == "dataset":
        return DATASET_ORDER.index(value)
    if axis == "model":
        return MODEL_ORDER.index(value)
    return value


def aggregate(
    rows: Sequence[ResultRow], group_by: Sequence[str], metric_names: Sequence[str]
) -> pd.DataFrame:
    """
    One line per cell of ``group_by`` with ``<metric>_mean``, ``<metric>_std``
    and the number of rows ``n``.

    Failed rows are skipped. A metric with no values in a cell stays empty.
    Cells come out in canonical axis order and the result does not depend on
    the order of ``rows``.
    """
    unknown = [axis for axis in group_by if axis not in GROUP_AXES]
    if unknown:
        raise ValueError(f"Cannot group by {unknown}; axes are {GROUP_AXES}")

    cells: Dict[tuple, List[ResultRow]] = {}
    for row in rows:
        if row.error:
            continue
        key = tuple(getattr(row, axis) for axis in group_by)
        cells.setdefault(key, []).append(row)

    ordered_keys = sorted(
        cells, key=lambda key: tuple(_axis_rank(axis, v) for axis, v in zip(group_by, key))
    )
    records = []
    for key in ordered_keys:
        record = {
            axis: value.value if hasattr(value, "value") else value
            for axis, value in zip(group_by, key)
        }
        members = cells[key]
        record["n"] = len(members)
        for name in metric_names:
            values = [getattr(row, name) for row in members if getattr(row, name) is not None]
            record[f"{name}_mean"], record[f"{name}_std"] = _mean_std(values)
        records.append(record)

    columns = list(group_by) + ["n"]
    for name in metric_names:
        columns += [f"{name}_mean", f"{name}_std"]
    return pd.DataFrame(records, columns=columns)


class ReportTable(NamedTuple):
    filename: str
    group_by: tuple
    metric_names: tuple
    select: Callable[[ResultRow], bool]


def _synthetic(row: ResultRow) -> bool:
    return row.dataset.is_synthetic


def _synthetic_bayes(row: ResultRow) -> bool:
    return row.dataset.is_synthetic and row.model.is_bayesian


def _diabetes(row: ResultRow) -> bool:
    return row.dataset is DatasetKind.DIABETES


def _correlated(row: ResultRow) -> bool:
    return row.dataset in (DatasetKind.BLOCK, DatasetKind.TOEPLITZ)


REPORT_TABLES = (
    ReportTable(
        "summary_by_model.csv",
        ("model",),
        ("test_mse", "test_rmse", "coef_l2", "precision", "recall", "f1", "fit_time_s"),
        _synthetic,
    ),
    ReportTable("calibration.csv", ("model",), ("coverage", "interval_width"), _synthetic_bayes),
    ReportTable("mse_by_rho.csv", ("model", "rho"), ("test_mse",), _synthetic),
    ReportTable("mse_by_rho_design.csv", ("dataset", "model", "rho"), ("test_mse",), _correlated),
    ReportTable("f1_by_snr.csv", ("model", "snr"), ("f1",), _synthetic),
    ReportTable("time_by_p.csv", ("model", "p"), ("fit_time_s",), _synthetic),
    # One line per replicate seed; the spread down a model's lines is the seed effect
    ReportTable("seed_stability.csv", ("model", "seed"), ("test_mse",), _synthetic),
)

SUPPLEMENTARY_TABLES = (
    ReportTable("diabetes.csv", ("model",), ("test_mse", "test_rmse", "fit_time_s"), _diabetes),
    ReportTable("l2_by_p.csv", ("model", "p"), ("coef_l2",), _synthetic),
    ReportTable("mse_by_snr.csv", ("dataset", "model", "snr"), ("test_mse",), _synthetic),
)


def build_reports(rows: Sequence[ResultRow], supplementary: bool = True) -> Dict[str, pd.DataFrame]:
    tables = REPORT_TABLES + (SUPPLEMENTARY_TABLES if supplementary else ())
    return {
        table.filename: aggregate(
            [row for row in rows if table.select(row)], table.group_by, table.metric_names
        )
        for table in tables
    }


def write_reports(
    rows: Sequence[ResultRow], out_dir: Union[str, Path], supplementary: bool = True
) -> List[Path]:
    """
    Write every report table as CSV under ``out_dir``; returns the paths written.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise StorageError(f"Could not create report directory ({e.strerror or e})", path=out_dir) from e

    written = []
    for filename, frame in build_reports(rows, supplementary).items():
        path = out_dir / filename
        try:
            frame.to_csv(path, index=False, na_rep="", lineterminator="\n")
        except OSError as e:
            raise StorageError(f"Could not write report ({e.strerror or e})", path=path) from e
        logger.info(f"Wrote {path} ({len(frame)} rows)")
        written.append(path)
    return written
