"""
Experiment grid, deterministic per-cell seeding, and the experiment runner.
"""

import hashlib
import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from typing import Dict, Iterable, List, Optional, Set

from sparsebench.core.config import Settings
from sparsebench.core.exceptions import BenchError, ConfigError
from sparsebench.schemas.data import CovarianceSpec, Dataset
from sparsebench.schemas.experiment import DatasetKind, ExperimentSpec, ModelKind, ResultRow
from sparsebench.schemas.fit import CvPlan, FitResult
from sparsebench.services import bayes, classical, datagen, metrics

logger = logging.getLogger(__name__)

LARGE_P = 100

# Axis placeholders for the real dataset
DIABETES_RHO = 0.0
DIABETES_SNR = 0.0
DIABETES_P = len(datagen.DIABETES_FEATURES)

DATA_STREAM = "data"
FIT_STREAM = "fit"

SUBSET_AXES = ("dataset", "model", "rho", "snr", "p", "seed")


def expand_grid(config: Settings, bayes_at_p100: Optional[bool] = None) -> List[ExperimentSpec]:
    """
    Cartesian product of the configured axes in canonical order.

    The independent design only runs at rho = 0, and Bayesian models are left
    out at p >= 100 unless ``bayes_at_p100`` (or BAYES_AT_P100) is set.
    """
    include_large_bayes = config.BAYES_AT_P100 if bayes_at_p100 is None else bayes_at_p100
    specs: Set[ExperimentSpec] = set()

    for dataset, model in itertools.product(config.DATASETS, config.MODELS):
        if dataset is DatasetKind.DIABETES:
            for seed in config.SEEDS:
                specs.add(
                    ExperimentSpec(
                        dataset=dataset,
                        model=model,
                        rho=DIABETES_RHO,
                        snr=DIABETES_SNR,
                        p=DIABETES_P,
                        seed=seed,
                    )
                )
            continue

        rhos = [0.0] if dataset is DatasetKind.INDEPENDENT else config.RHOS
        for rho, snr, p, seed in itertools.product(rhos, config.SNRS, config.PS, config.SEEDS):
            if model.is_bayesian and p >= LARGE_P and not include_large_bayes:
                continue
            specs.add(
                ExperimentSpec(dataset=dataset, model=model, rho=rho, snr=snr, p=p, seed=seed)
            )

    return sorted(specs, key=ExperimentSpec.sort_key)


def derive_seed(spec: ExperimentSpec, base_seed: int, stream: str = DATA_STREAM) -> int:
    """
    64-bit seed from the data axes of ``spec``; the model never enters, so every
    model in a cell sees the same data.
    """
    text = (
        f"{spec.dataset.value}|{float(spec.rho)!r}|{float(spec.snr)!r}|{spec.p}|"
        f"{spec.seed}|{base_seed}|{stream}"
    )
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def parse_subset(text: str) -> Dict[str, Set[str]]:
    """
    Parse ``axis=value[,axis=value...]``; repeating an axis ORs its values.
    """
    filters: Dict[str, Set[str]] = {}
    for item in filter(None, (part.strip() for part in text.split(","))):
        axis, sep, value = item.partition("=")
        axis, value = axis.strip(), value.strip()
        if not sep or not value:
            raise ConfigError(f"Subset filter {item!r} is not of the form axis=value")
        if axis not in SUBSET_AXES:
            raise ConfigError(f"Unknown subset axis {axis!r}; expected one of {', '.join(SUBSET_AXES)}")
        filters.setdefault(axis, set()).add(value)
    return filters


def _matches(spec: ExperimentSpec, axis: str, values: Set[str]) -> bool:
    actual = getattr(spec, axis)
    if axis in ("dataset", "model"):
        return actual.value in values
    try:
        if axis in ("rho", "snr"):
            return any(float(actual) == float(v) for v in values)
        return any(int(actual) == int(v) for v in values)
    except ValueError:
        raise ConfigError(f"Subset value for {axis} must be numeric, got {sorted(values)}") from None


def filter_specs(specs: Iterable[ExperimentSpec], filters: Dict[str, Set[str]]) -> List[ExperimentSpec]:
    return [
        spec for spec in specs if all(_matches(spec, axis, values) for axis, values in filters.items())
    ]


def load_dataset(spec: ExperimentSpec, config: Settings) -> Dataset:
    """
    Generate (or load and split) the dataset of a grid cell.
    """
    seed = derive_seed(spec, config.BASE_SEED, DATA_STREAM)
    if spec.dataset is DatasetKind.DIABETES:
        if not config.DIABETES_PATH:
            raise ConfigError("DIABETES_PATH is not set; cannot run the diabetes dataset")
        return datagen.load_diabetes(config.DIABETES_PATH, split_seed=seed)
    cov = CovarianceSpec(design=spec.dataset.design, p=spec.p, rho=spec.rho)
    return datagen.generate_dataset(cov, spec.snr, seed)


def fit_spec(spec: ExperimentSpec, dataset: Dataset, config: Settings) -> FitResult:
    x, y = dataset.x_train, dataset.y_train
    if spec.model is ModelKind.OLS:
        return classical.fit_ols(x, y)
    if spec.model is ModelKind.RIDGE:
        return classical.fit_ridge_loocv(x, y)

    fold_seed = derive_seed(spec, config.BASE_SEED, DATA_STREAM)
    if spec.model is ModelKind.LASSO:
        plan = CvPlan(n_folds=config.CV_FOLDS, fold_seed=fold_seed)
        return classical.fit_lasso_cv(x, y, plan, tol=config.CD_TOL, max_iter=config.CD_MAX_ITER)
    if spec.model is ModelKind.ELASTIC_NET:
        plan = CvPlan(n_folds=config.CV_FOLDS, alpha_grid=classical.ENET_ALPHAS, fold_seed=fold_seed)
        return classical.fit_elastic_net_cv(x, y, plan, tol=config.CD_TOL, max_iter=config.CD_MAX_ITER)

    sampler = config.sampler_config(derive_seed(spec, config.BASE_SEED, FIT_STREAM))
    return bayes.fit_bayes(spec.model, dataset, sampler)


def score(spec: ExperimentSpec, dataset: Dataset, fit: FitResult) -> ResultRow:
    """
    All metrics that apply to this (dataset, model) pair.
    """
    fields = {"fit_time_s": fit.fit_time, "divergences": fit.divergences}

    prediction = metrics.prediction_metrics(dataset.y_test, dataset.x_test @ fit.beta_hat)
    fields.update(test_mse=prediction.mse, test_rmse=prediction.rmse)

    if dataset.truth is not None:
        coefficients = metrics.coefficient_metrics(fit.beta_hat, dataset.truth.beta_star)
        selection = metrics.selection_metrics(fit.beta_hat, dataset.truth.support)
        fields.update(
            coef_l2=coefficients.l2_error,
            coef_mse=coefficients.coef_mse,
            precision=selection.precision,
            recall=selection.recall,
            f1=selection.f1,
        )
        if fit.posterior is not None:
            calibration = metrics.calibration_metrics(fit.posterior, dataset.truth.beta_star)
            fields.update(coverage=calibration.coverage, interval_width=calibration.avg_width)

    if fit.chosen_penalty is not None:
        fields.update(chosen_lambda=fit.chosen_penalty.lam, chosen_alpha=fit.chosen_penalty.alpha)
    return ResultRow.from_spec(spec, **fields)


def _error_text(error: Exception) -> str:
    message = " ".join(str(error).split())
    return f"{type(error).__name__}: {message}" if message else type(error).__name__


def run_experiment(spec: ExperimentSpec, config: Settings) -> ResultRow:
    """
    Build the data, fit the model and score it. Any failure comes back as a
    failed row so the rest of the batch keeps going.
    """
    try:
        dataset = load_dataset(spec, config)
        fit = fit_spec(spec, dataset, config)
        row = score(spec, dataset, fit)
    except BenchError as e:
        logger.warning(f"{spec.label()} failed: {_error_text(e)}")
        return ResultRow.from_spec(spec, error=_error_text(e))
    except Exception as e:
        logger.exception(f"Unexpected error in {spec.label()}: {_error_text(e)}")
        return ResultRow.from_spec(spec, error=_error_text(e))

    logger.info(f"{spec.label()}: test mse {row.test_mse:.4g} in {row.fit_time_s:.2f}s")
    return row


class ExperimentRunner:
    """
    Runs grid cells serially or on a process pool and returns rows in grid order.
    """

    def __init__(self, config: Settings, jobs: Optional[int] = None):
        self.config = config
        self.jobs = jobs or config.JOBS

    def specs(self, subset: Optional[str] = None, bayes_at_p100: Optional[bool] = None) -> List[ExperimentSpec]:
        specs = expand_grid(self.config, bayes_at_p100)
        if subset:
            specs = filter_specs(specs, parse_subset(subset))
        return specs

    def run(self, specs: List[ExperimentSpec]) -> List[ResultRow]:
        specs = sorted(specs, key=ExperimentSpec.sort_key)
        logger.info(f"Running {len(specs)} experiments with {self.jobs} job(s)")
        job = partial(run_experiment, config=self.config)
        if self.jobs == 1 or len(specs) <= 1:
            rows = [job(spec) for spec in specs]
        else:
            with ProcessPoolExecutor(max_workers=self.jobs) as pool:
                rows = list(pool.map(job, specs, chunksize=1))

        failed = sum(1 for row in rows if row.error)
        if failed:
            logger.warning(f"{failed} of {len(rows)} experiments failed")
        return rows
