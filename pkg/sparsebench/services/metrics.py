import math
from typing import Sequence

import numpy as np

from sparsebench.schemas.fit import CoefficientSummary
from sparsebench.schemas.metrics import (
    CalibrationMetrics,
    CoefficientMetrics,
    PredictionMetrics,
    SelectionMetrics,
)

SELECTION_THRESHOLD = 0.01


def _same_length(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{what} length mismatch: {a.shape[0]} vs {b.shape[0]}")


def prediction_metrics(y_true, y_pred) -> PredictionMetrics:
    y_true = np.asarray(y_true, dtype=float).ravel()
    y_pred = np.asarray(y_pred, dtype=float).ravel()
    _same_length(y_true, y_pred, "prediction")
    if y_true.shape[0] == 0:
        raise ValueError("prediction metrics need at least one observation")
    mse = float(np.mean((y_true - y_pred) ** 2))
    return PredictionMetrics(mse=mse, rmse=math.sqrt(mse))


def coefficient_metrics(beta_hat, beta_star) -> CoefficientMetrics:
    beta_hat = np.asarray(beta_hat, dtype=float).ravel()
    beta_star = np.asarray(beta_star, dtype=float).ravel()
    _same_length(beta_hat, beta_star, "coefficient")
    l2 = float(np.linalg.norm(beta_hat - beta_star))
    return CoefficientMetrics(l2_error=l2, coef_mse=l2**2 / beta_star.shape[0])


def selection_metrics(
    beta_hat, support_true, threshold: float = SELECTION_THRESHOLD
) -> SelectionMetrics:
    """
    Support recovery of ``{j : |beta_hat_j| > threshold}`` (strict) against the
    true support. F1 is 0 when either set is empty or they do not meet.
    """
    beta_hat = np.asarray(beta_hat, dtype=float).ravel()
    selected = set(np.flatnonzero(np.abs(beta_hat) > threshold).tolist())
    truth = set(int(j) for j in np.asarray(support_true).ravel())
    hits = len(selected & truth)

    precision = hits / len(selected) if selected else 0.0
    recall = hits / len(truth) if truth else 0.0
    f1 = 2 * precision * recall / (precision + recall) if hits else 0.0
    return SelectionMetrics(
        precision=precision, recall=recall, f1=f1, support_size_hat=len(selected)
    )


def calibration_metrics(
    summaries: Sequence[CoefficientSummary], beta_star
) -> CalibrationMetrics:
    """
    Fraction of true coefficients inside their HDI (endpoints count) and the
    mean interval width.
    """
    beta_star = np.asarray(beta_star, dtype=float).ravel()
    if len(summaries) != beta_star.shape[0]:
        raise ValueError(
            f"calibration length mismatch: {len(summaries)} summaries vs "
            f"{beta_star.shape[0]} coefficients"
        )
    low = np.array([s.hdi_low for s in summaries])
    high = np.array([s.hdi_high for s in summaries])
    covered = (low <= beta_star) & (beta_star <= high)
    widths = [s.width for s in summaries]
    return CalibrationMetrics(coverage=float(np.mean(covered)), avg_width=float(np.mean(widths)))
