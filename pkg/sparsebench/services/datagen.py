"""
Synthetic sparse regression problems and the Diabetes loader.

Synthetic designs are drawn as X ~ N(0, Sigma) through the Cholesky factor of
Sigma, coefficients are 80% sparse with N(0, 9) nonzeros, and the noise level is
calibrated so that Var(X beta) / sigma^2 equals the requested SNR.
"""

import logging
import math
from pathlib import Path
from typing import Tuple, Union

import numpy as np
import pandas as pd
import scipy.linalg

from sparsebench.core.exceptions import CovarianceError, DataFormatError
from sparsebench.core.rng import make_rng
from sparsebench.schemas.data import CovarianceDesign, CovarianceSpec, Dataset, GroundTruth

logger = logging.getLogger(__name__)

TEST_SIZE = 200
MIN_TRAIN_SIZE = 50
SPARSITY_FRACTION = 0.2
COEFFICIENT_SD = 3.0

DIABETES_FEATURES = ("age", "sex", "bmi", "bp", "s1", "s2", "s3", "s4", "s5", "s6")
DIABETES_COLUMNS = DIABETES_FEATURES + ("target",)
DIABETES_ROWS = 442
DIABETES_TEST_FRACTION = 0.2


def build_covariance(spec: CovarianceSpec) -> np.ndarray:
    """
    Build the p x p correlation matrix for a design.
    """
    if spec.p < 1:
        raise CovarianceError(f"p must be at least 1, got {spec.p}")
    if not 0.0 <= spec.rho < 1.0:
        raise CovarianceError(f"rho must lie in [0, 1), got {spec.rho}")

    if spec.design is CovarianceDesign.INDEPENDENT:
        return np.eye(spec.p)

    idx = np.arange(spec.p)
    if spec.design is CovarianceDesign.BLOCK:
        block = idx // spec.block_size
        cov = np.where(block[:, None] == block[None, :], spec.rho, 0.0)
    else:
        cov = spec.rho ** np.abs(idx[:, None] - idx[None, :]).astype(float)
    np.fill_diagonal(cov, 1.0)
    return cov


def cholesky_factor(cov: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor; a failure means the covariance is not positive definite."""
    try:
        return scipy.linalg.cholesky(cov, lower=True)
    except np.linalg.LinAlgError as e:
        raise CovarianceError(f"Covariance is not positive definite: {e}") from e


def sample_design(cov: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """
    Draw n i.i.d. rows from N(0, cov) as standard normals times the Cholesky factor.
    """
    factor = cholesky_factor(cov)
    z = rng.standard_normal((n, cov.shape[0]))
    return z @ factor.T


def sample_sparse_beta(p: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """
    Draw floor(0.2 p) N(0, 9) coefficients at uniformly chosen positions.

    Returns ``(beta_star, support)`` with ``support`` sorted.
    """
    s = math.floor(SPARSITY_FRACTION * p)
    if s < 1:
        raise ValueError(f"p must be at least 5 to hold a nonzero coefficient, got {p}")

    # Partial Fisher-Yates shuffle: the first s slots are a uniform draw without replacement
    order = np.arange(p)
    for i in range(s):
        j = int(rng.integers(i, p))
        order[i], order[j] = order[j], order[i]
    positions = order[:s]

    beta = np.zeros(p)
    beta[positions] = COEFFICIENT_SD * rng.standard_normal(s)
    return beta, np.sort(positions)


def calibrate_noise(signal: np.ndarray, snr: float) -> float:
    """
    Noise standard deviation sqrt(Var(signal) / snr), population variance.
    """
    if snr <= 0:
        raise ValueError(f"snr must be positive, got {snr}")
    signal = np.asarray(signal, dtype=float)
    variance = float(np.var(signal))
    scale = float(np.mean(signal**2)) if signal.size else 0.0
    if variance <= np.finfo(float).eps * max(scale, np.finfo(float).tiny):
        raise ValueError("Signal has zero variance; beta_star is degenerate")
    return math.sqrt(variance / snr)


def train_size(p: int) -> int:
    return max(MIN_TRAIN_SIZE, math.floor(1.5 * p))


def generate_dataset(
    spec: CovarianceSpec, snr: float, seed: int, n_test: int = TEST_SIZE
) -> Dataset:
    """
    Generate one synthetic replicate; a pure function of (spec, snr, seed).
    """
    rng = make_rng(seed)
    cov = build_covariance(spec)
    n_train = train_size(spec.p)

    x = sample_design(cov, n_train + n_test, rng)
    beta_star, support = sample_sparse_beta(spec.p, rng)
    signal = x @ beta_star
    # One sigma for both partitions, calibrated on the combined signal
    sigma = calibrate_noise(signal, snr)
    y = signal + sigma * rng.standard_normal(signal.shape[0])

    truth = GroundTruth(beta_star=beta_star, support=support, sigma=sigma, snr=snr)
    name = f"{spec.design.value}-p{spec.p}-rho{spec.rho}-snr{snr}-seed{seed}"
    logger.debug(f"Generated {name}: n_train={n_train}, sigma={sigma:.4f}")
    return Dataset(
        x_train=x[:n_train],
        y_train=y[:n_train],
        x_test=x[n_train:],
        y_test=y[n_train:],
        truth=truth,
        name=name,
    )


def standardize(
    train: np.ndarray, test: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Center and scale both folds with training-fold statistics.
    """
    mean = train.mean(axis=0)
    scale = train.std(axis=0)
    constant = scale == 0
    if np.any(constant):
        logger.warning("Constant training column(s) left unscaled")
        scale = np.where(constant, 1.0, scale)
    return (train - mean) / scale, (test - mean) / scale, mean, scale


def _detect_separator(first_line: str) -> str:
    if "," in first_line:
        return ","
    if "\t" in first_line:
        return "\t"
    return r"\s+"


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _read_table(path: Path) -> Tuple[pd.DataFrame, int]:
    """Read the raw cells as text; returns the frame and the number of header lines."""
    try:
        with path.open("r", encoding="utf-8") as handle:
            first_line = next((line for line in handle if line.strip()), "")
    except OSError as e:
        raise DataFormatError(f"Cannot read diabetes file {path}: {e}") from e
    if not first_line:
        raise DataFormatError(f"Diabetes file {path} is empty")

    sep = _detect_separator(first_line)
    try:
        frame = pd.read_csv(
            path,
            sep=sep,
            header=None,
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=True,
            engine="python",
        )
    except pd.errors.ParserError as e:
        raise DataFormatError(
            f"Malformed diabetes file {path}: {e}",
            expected=f"{len(DIABETES_COLUMNS)} columns per row",
        ) from e

    frame = frame.apply(lambda column: column.str.strip())
    header_lines = 0 if all(_is_number(cell) for cell in frame.iloc[0]) else 1
    return frame.iloc[header_lines:].reset_index(drop=True), header_lines


def load_diabetes(path: Union[str, Path], split_seed: int) -> Dataset:
    """
    Load the Diabetes table (10 features then the target), split 80/20 with
    ``split_seed`` and standardize features and target on the training fold.

    Headered or headerless, comma, tab or whitespace separated files are accepted.
    """
    path = Path(path)
    frame, header_lines = _read_table(path)

    expected = f"{len(DIABETES_COLUMNS)} columns: {', '.join(DIABETES_COLUMNS)}"
    if frame.shape[1] != len(DIABETES_COLUMNS):
        raise DataFormatError(
            f"Diabetes file {path} has {frame.shape[1]} columns",
            row=header_lines + 1,
            expected=expected,
        )

    values = frame.apply(pd.to_numeric, errors="coerce")
    bad = values.isna().to_numpy()
    if bad.any():
        row, column = (int(i) for i in np.argwhere(bad)[0])
        raise DataFormatError(
            f"Non-numeric cell {frame.iat[row, column]!r} in {path}",
            row=row + header_lines + 1,
            column=column + 1,
            expected=expected,
        )

    data = values.to_numpy(dtype=float)
    n = data.shape[0]
    if n != DIABETES_ROWS:
        logger.warning(f"Diabetes file {path} has {n} rows, expected {DIABETES_ROWS}")
    n_test = math.floor(DIABETES_TEST_FRACTION * n)
    if n_test < 1 or n - n_test < 2:
        raise DataFormatError(f"Diabetes file {path} has too few rows ({n}) to split")

    order = make_rng(split_seed).permutation(n)
    train, test = data[order[: n - n_test]], data[order[n - n_test :]]
    train, test, _, _ = standardize(train, test)

    return Dataset(
        x_train=train[:, :-1],
        y_train=train[:, -1],
        x_test=test[:, :-1],
        y_test=test[:, -1],
        truth=None,
        name=f"diabetes-split{split_seed}",
    )
