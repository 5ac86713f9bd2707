"""
Classical estimators: OLS, Ridge with closed-form LOOCV, and Lasso / Elastic Net
fitted by cyclic coordinate descent with K-fold cross-validation.

Objectives follow the benchmark's definitions (no intercept, no 1/2 on the l2 term):

    (1/2n) |y - Xb|^2 + lam * (alpha * |b|_1 + (1 - alpha) * |b|_2^2)
"""

import logging
import time
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from sparsebench.core.exceptions import IllPosedError
from sparsebench.core.rng import make_rng
from sparsebench.schemas.fit import CvPlan, FitResult, PenaltyConfig

logger = logging.getLogger(__name__)

RIDGE_LAMBDAS = np.logspace(-4, 4, 50)
ENET_ALPHAS = (0.1, 0.5, 0.7, 0.9, 0.95, 0.99, 1.0)
OLS_RCOND = 1e-10
DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 10_000


class DescentResult(NamedTuple):
    beta: np.ndarray
    converged: bool
    sweeps: int


def soft_threshold(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


# --------------------------------------------------------------------------
# OLS and Ridge
# --------------------------------------------------------------------------


def fit_ols(x: np.ndarray, y: np.ndarray) -> FitResult:
    """
    Least squares through the thin SVD; rejects rank-deficient designs.
    """
    start = time.perf_counter()
    n, p = x.shape
    if n < p:
        raise IllPosedError(f"OLS needs n >= p, got n={n}, p={p}")

    u, s, vt = scipy.linalg.svd(x, full_matrices=False)
    if s[-1] < OLS_RCOND * s[0]:
        raise IllPosedError(
            f"Design is rank deficient (condition number {s[0] / max(s[-1], 1e-300):.3g})"
        )
    beta = vt.T @ ((u.T @ y) / s)
    return FitResult(beta_hat=beta, fit_time=time.perf_counter() - start)


def _ridge_shrinkage(s: np.ndarray, lam: float, n: int) -> np.ndarray:
    # (X^T X + 2 n lam I)^-1 X^T in the singular basis
    return s**2 / (s**2 + 2.0 * n * lam)


def ridge_solution(x: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """Minimizer of (1/2n)|y - Xb|^2 + lam |b|^2."""
    n = x.shape[0]
    u, s, vt = scipy.linalg.svd(x, full_matrices=False)
    return vt.T @ (s / (s**2 + 2.0 * n * lam) * (u.T @ y))


def ridge_loocv_errors(
    x: np.ndarray, y: np.ndarray, lambdas: Sequence[float]
) -> np.ndarray:
    """
    Leave-one-out residuals e_i / (1 - h_ii) for each lambda, shape (len(lambdas), n).

    One SVD of X serves the whole grid.
    """
    n = x.shape[0]
    u, s, _ = scipy.linalg.svd(x, full_matrices=False)
    uty = u.T @ y
    u_sq = u**2
    residuals = np.empty((len(lambdas), n))
    for i, lam in enumerate(lambdas):
        shrink = _ridge_shrinkage(s, lam, n)
        fitted = u @ (shrink * uty)
        leverage = u_sq @ shrink
        residuals[i] = (y - fitted) / (1.0 - leverage)
    return residuals


def fit_ridge_loocv(
    x: np.ndarray, y: np.ndarray, lambdas: Sequence[float] = RIDGE_LAMBDAS
) -> FitResult:
    """
    Ridge at the lambda minimizing closed-form LOOCV mean squared error.
    """
    start = time.perf_counter()
    if x.shape[0] < 2:
        raise IllPosedError("Ridge LOOCV needs at least two observations")

    lambdas = np.asarray(lambdas, dtype=float)
    loo = ridge_loocv_errors(x, y, lambdas)
    cv_mse = np.mean(loo**2, axis=1)
    best = int(np.argmin(cv_mse))
    lam = float(lambdas[best])
    beta = ridge_solution(x, y, lam)
    logger.debug(f"Ridge LOOCV picked lambda={lam:.4g} (cv mse {cv_mse[best]:.4g})")
    return FitResult(
        beta_hat=beta,
        chosen_penalty=PenaltyConfig(lam=lam, alpha=0.0),
        fit_time=time.perf_counter() - start,
    )


# --------------------------------------------------------------------------
# Coordinate descent
# --------------------------------------------------------------------------


class _GramProblem:
    """
    Sufficient statistics of a least-squares problem: X^T X / n and X^T y / n.
    """

    def __init__(self, x: np.ndarray, y: np.ndarray):
        n = x.shape[0]
        self.n = n
        self.p = x.shape[1]
        self.gram = x.T @ x / n
        self.xty = x.T @ y / n
        self.diag = np.diag(self.gram).copy()


def _split_penalty(penalty: PenaltyConfig) -> Tuple[float, float]:
    # l1 weight and the derivative weight of the l2 term
    return penalty.lam * penalty.alpha, 2.0 * penalty.lam * (1.0 - penalty.alpha)


def _kkt_violation(beta, grad, l1, l2) -> np.ndarray:
    active = beta != 0
    return np.where(
        active,
        np.abs(grad - l2 * beta - l1 * np.sign(beta)),
        np.maximum(np.abs(grad) - l1, 0.0),
    )


def _descend(
    problem: _GramProblem,
    l1: float,
    l2: float,
    beta0: np.ndarray,
    tol: float,
    max_iter: int,
) -> DescentResult:
    """
    Cyclic coordinate descent on the working set (nonzeros plus KKT violators),
    followed by a full KKT check that re-opens the working set when needed.
    """
    gram, diag = problem.gram, problem.diag
    denom = diag + l2
    beta = np.array(beta0, dtype=float, copy=True)
    # grad = (1/n) X^T r
    grad = problem.xty - gram @ beta
    sweeps = 0

    while sweeps < max_iter:
        working = np.flatnonzero((beta != 0) | (np.abs(grad) > l1))
        while sweeps < max_iter:
            sweeps += 1
            max_change = 0.0
            for j in working:
                old = beta[j]
                if denom[j] > 0:
                    z = grad[j] + diag[j] * old
                    new = np.sign(z) * max(abs(z) - l1, 0.0) / denom[j]
                else:
                    new = 0.0
                delta = new - old
                if delta != 0.0:
                    beta[j] = new
                    grad -= gram[:, j] * delta
                    max_change = max(max_change, abs(delta))
            threshold = tol * max(1.0, float(np.max(np.abs(beta), initial=0.0)))
            if max_change < threshold:
                break

        # Refresh to drop accumulated rounding in the incremental gradient
        grad = problem.xty - gram @ beta
        threshold = tol * max(1.0, float(np.max(np.abs(beta), initial=0.0)))
        if np.max(_kkt_violation(beta, grad, l1, l2), initial=0.0) <= threshold:
            return DescentResult(beta=beta, converged=True, sweeps=sweeps)

    return DescentResult(beta=beta, converged=False, sweeps=sweeps)


def coordinate_descent(
    x: np.ndarray,
    y: np.ndarray,
    penalty: PenaltyConfig,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    warm_start: Optional[np.ndarray] = None,
) -> DescentResult:
    """
    Minimize the Elastic-Net objective from ``warm_start`` (zeros when omitted).

    Exceeding ``max_iter`` sweeps returns the last iterate with ``converged=False``.
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    problem = _GramProblem(x, y)
    beta0 = np.zeros(problem.p) if warm_start is None else warm_start
    l1, l2 = _split_penalty(penalty)
    return _descend(problem, l1, l2, beta0, tol, max_iter)


def elastic_net_objective(
    x: np.ndarray, y: np.ndarray, beta: np.ndarray, penalty: PenaltyConfig
) -> float:
    n = x.shape[0]
    r = y - x @ beta
    l1_term = penalty.alpha * np.sum(np.abs(beta))
    l2_term = (1.0 - penalty.alpha) * np.sum(beta**2)
    return float(r @ r / (2.0 * n) + penalty.lam * (l1_term + l2_term))


def kkt_residuals(
    x: np.ndarray, y: np.ndarray, beta: np.ndarray, penalty: PenaltyConfig
) -> np.ndarray:
    """
    Per-coordinate violation of the subgradient optimality conditions.
    """
    n = x.shape[0]
    grad = x.T @ (y - x @ beta) / n
    l1, l2 = _split_penalty(penalty)
    return _kkt_violation(beta, grad, l1, l2)


# --------------------------------------------------------------------------
# Paths and cross-validation
# --------------------------------------------------------------------------


def lambda_max(x: np.ndarray, y: np.ndarray, alpha: float = 1.0) -> float:
    """Smallest lambda at which the all-zero vector is optimal."""
    n = x.shape[0]
    return float(np.max(np.abs(x.T @ y)) / n / alpha)


def lambda_path(lam_max: float, n_lambdas: int = 100, ratio: float = 1e-3) -> np.ndarray:
    if lam_max <= 0:
        raise IllPosedError("Response is orthogonal to every feature; no lambda path")
    return np.geomspace(lam_max, ratio * lam_max, n_lambdas)


def _path(
    problem: _GramProblem,
    lambdas: np.ndarray,
    alpha: float,
    tol: float,
    max_iter: int,
) -> Tuple[np.ndarray, np.ndarray]:
    coefs = np.zeros((len(lambdas), problem.p))
    converged = np.ones(len(lambdas), dtype=bool)
    beta = np.zeros(problem.p)
    for i, lam in enumerate(lambdas):
        l1, l2 = _split_penalty(PenaltyConfig(lam=lam, alpha=alpha))
        result = _descend(problem, l1, l2, beta, tol, max_iter)
        beta = result.beta
        coefs[i] = beta
        converged[i] = result.converged
    return coefs, converged


def enet_path(
    x: np.ndarray,
    y: np.ndarray,
    lambdas: Sequence[float],
    alpha: float = 1.0,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Warm-started solutions along a descending lambda grid.

    Returns the (len(lambdas), p) coefficient matrix and per-lambda convergence flags.
    """
    return _path(_GramProblem(x, y), np.asarray(lambdas, dtype=float), alpha, tol, max_iter)


def kfold_split(n: int, k: int, fold_seed: int) -> List[np.ndarray]:
    """
    Shuffle 0..n-1 and cut into k folds whose sizes differ by at most one.
    """
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    if k > n:
        raise ValueError(f"Cannot make {k} folds from {n} observations")
    order = make_rng(fold_seed).permutation(n)
    return [np.sort(fold) for fold in np.array_split(order, k)]


class CvCell(NamedTuple):
    alpha: float
    lam: float
    index: int
    error: float


def select_cv_cell(cells: Sequence[CvCell]) -> CvCell:
    """
    Minimum CV error; ties go to the larger alpha, then the larger lambda.
    """
    return min(cells, key=lambda cell: (cell.error, -cell.alpha, -cell.lam))


def _alpha_lambdas(x, y, plan: CvPlan, alpha: float) -> np.ndarray:
    if plan.lambda_grid is not None:
        return np.asarray(plan.lambda_grid, dtype=float)
    return lambda_path(lambda_max(x, y, alpha), plan.n_lambdas, plan.lambda_ratio)


def fit_elastic_net_cv(
    x: np.ndarray,
    y: np.ndarray,
    plan: CvPlan,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> FitResult:
    """
    Grid search over (alpha, lambda) by K-fold CV on folds fixed for the whole
    grid, then a warm-started refit on all training rows at the chosen cell.
    """
    start = time.perf_counter()
    n = x.shape[0]
    if n < plan.n_folds:
        raise IllPosedError(f"Need at least {plan.n_folds} observations, got {n}")

    folds = kfold_split(n, plan.n_folds, plan.fold_seed)
    fold_problems = []
    for fold in folds:
        train = np.ones(n, dtype=bool)
        train[fold] = False
        fold_problems.append((_GramProblem(x[train], y[train]), x[fold], y[fold]))

    cells: List[CvCell] = []
    paths = {}
    all_converged = True
    for alpha in sorted(set(plan.alpha_grid), reverse=True):
        lambdas = _alpha_lambdas(x, y, plan, alpha)
        paths[alpha] = lambdas
        fold_mse = np.empty((len(folds), len(lambdas)))
        for k, (problem, x_val, y_val) in enumerate(fold_problems):
            coefs, converged = _path(problem, lambdas, alpha, tol, max_iter)
            all_converged &= bool(converged.all())
            residuals = y_val[:, None] - x_val @ coefs.T
            fold_mse[k] = np.mean(residuals**2, axis=0)
        cv_error = fold_mse.mean(axis=0)
        cells.extend(
            CvCell(alpha=alpha, lam=float(lam), index=i, error=float(cv_error[i]))
            for i, lam in enumerate(lambdas)
        )

    best = select_cv_cell(cells)
    lambdas = paths[best.alpha][: best.index + 1]
    coefs, converged = _path(_GramProblem(x, y), lambdas, best.alpha, tol, max_iter)
    all_converged &= bool(converged.all())
    if not all_converged:
        logger.warning(
            f"Coordinate descent hit max_iter={max_iter} on part of the CV grid"
        )

    logger.debug(
        f"CV picked alpha={best.alpha}, lambda={best.lam:.4g} (cv mse {best.error:.4g})"
    )
    return FitResult(
        beta_hat=coefs[-1],
        chosen_penalty=PenaltyConfig(lam=best.lam, alpha=best.alpha),
        fit_time=time.perf_counter() - start,
        converged=all_converged,
    )


def fit_lasso_cv(
    x: np.ndarray,
    y: np.ndarray,
    plan: CvPlan,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> FitResult:
    """
    Lasso: the Elastic-Net search restricted to alpha = 1.
    """
    return fit_elastic_net_cv(
        x, y, plan.model_copy(update={"alpha_grid": (1.0,)}), tol=tol, max_iter=max_iter
    )
