"""
Horseshoe and continuous Spike-and-Slab regression posteriors.

Both models are exposed as unconstrained targets for the NUTS sampler:
positive scales are sampled on the log scale and the inclusion probability on
the logit scale, with the matching log-Jacobian terms included.
"""

import logging
import math
import time
from typing import NamedTuple, Optional, Tuple, Union

import numpy as np
from scipy.special import expit

from sparsebench.core.exceptions import BenchError
from sparsebench.schemas.data import Dataset
from sparsebench.schemas.experiment import ModelKind
from sparsebench.schemas.fit import CoefficientSummary, FitResult
from sparsebench.schemas.sampler import SamplerConfig, TargetDensity
from sparsebench.services.sampler import run_chains, split_rhat

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)

# Horseshoe hyperparameters
TAU0 = 1.0
SIGMA_SCALE = 2.0

# Spike-and-Slab hyperparameters
SIGMA_SLAB = 5.0
SIGMA_SPIKE = 0.01
PI0 = 0.2
PI_BETA_B = 1.0 / PI0  # pi ~ Beta(1, 1/pi0)

HDI_PROB = 0.95
RHAT_WARN = 1.05


def to_positive(u):
    return np.exp(u)


def to_unit(u):
    return expit(u)


def half_cauchy_logpdf(log_x, scale: float):
    """
    log C+(x | 0, scale) evaluated at x = exp(log_x), and its derivative in log_x.
    """
    z = 2.0 * (log_x - math.log(scale))
    logp = math.log(2.0) - math.log(math.pi) - math.log(scale) - np.logaddexp(0.0, z)
    return logp, -2.0 * expit(z)


def _log_sigmoid(u):
    return -np.logaddexp(0.0, -u)


def _gaussian_loglik(x, y, beta, log_sigma) -> Tuple[float, np.ndarray, float]:
    """
    Returns (log likelihood, d/dbeta, d/dlog_sigma). Extreme log_sigma gives
    non-finite values instead of raising.
    """
    n = y.shape[0]
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        precision = np.exp(-2.0 * np.float64(log_sigma))
        resid = y - x @ beta
        rss = np.float64(resid @ resid)
        loglik = -0.5 * n * LOG_2PI - n * log_sigma - 0.5 * rss * precision
        return float(loglik), (x.T @ resid) * precision, float(-n + rss * precision)


def horseshoe_logp_grad(theta: np.ndarray, x: np.ndarray, y: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Log joint density of the non-centered Horseshoe at
    ``theta = [eta (p), log_lambda (p), log_tau, log_sigma]``.
    """
    p = x.shape[1]
    eta = theta[:p]
    log_lam = theta[p : 2 * p]
    log_tau = theta[2 * p]
    log_sigma = theta[2 * p + 1]

    scale = np.exp(log_lam + log_tau)
    beta = eta * scale
    loglik, g_beta, g_log_sigma = _gaussian_loglik(x, y, beta, log_sigma)

    lp_lam, d_lam = half_cauchy_logpdf(log_lam, 1.0)
    lp_tau, d_tau = half_cauchy_logpdf(log_tau, TAU0)
    lp_sigma, d_sigma = half_cauchy_logpdf(log_sigma, SIGMA_SCALE)

    logp = (
        loglik
        - 0.5 * float(eta @ eta)
        - 0.5 * p * LOG_2PI
        + float(np.sum(lp_lam))
        + float(lp_tau)
        + float(lp_sigma)
        # log-Jacobians of the exp transforms
        + float(np.sum(log_lam))
        + log_tau
        + log_sigma
    )

    g_scaled = g_beta * beta  # chain rule through beta = eta * exp(log_lam + log_tau)
    grad = np.empty_like(theta, dtype=float)
    grad[:p] = g_beta * scale - eta
    grad[p : 2 * p] = g_scaled + d_lam + 1.0
    grad[2 * p] = float(np.sum(g_scaled)) + d_tau + 1.0
    grad[2 * p + 1] = g_log_sigma + d_sigma + 1.0
    return float(logp), grad


def _normal_logpdf(beta, sd: float):
    return -0.5 * LOG_2PI - math.log(sd) - 0.5 * (beta / sd) ** 2


def spike_slab_mixture_logpdf(beta, logit_pi: float):
    """
    Per-coefficient log[pi N(b|0, slab^2) + (1-pi) N(b|0, spike^2)] and the slab
    responsibility of each coefficient.
    """
    slab = _log_sigmoid(logit_pi) + _normal_logpdf(beta, SIGMA_SLAB)
    spike = _log_sigmoid(-logit_pi) + _normal_logpdf(beta, SIGMA_SPIKE)
    return np.logaddexp(slab, spike), expit(slab - spike)


def spike_slab_logp_grad(theta: np.ndarray, x: np.ndarray, y: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Log joint density of the marginalized Spike-and-Slab at
    ``theta = [beta (p), logit_pi, log_sigma]``.
    """
    p = x.shape[1]
    beta = theta[:p]
    u = theta[p]
    log_sigma = theta[p + 1]
    pi = float(expit(u))
    log_pi = float(_log_sigmoid(u))
    log_1m_pi = float(_log_sigmoid(-u))

    loglik, g_beta, g_log_sigma = _gaussian_loglik(x, y, beta, log_sigma)
    mixture, w = spike_slab_mixture_logpdf(beta, u)
    lp_sigma, d_sigma = half_cauchy_logpdf(log_sigma, SIGMA_SCALE)

    logp = (
        loglik
        + float(np.sum(mixture))
        # Beta(1, b) prior on pi
        + math.log(PI_BETA_B)
        + (PI_BETA_B - 1.0) * log_1m_pi
        + float(lp_sigma)
        # logistic and exp Jacobians
        + log_pi
        + log_1m_pi
        + log_sigma
    )

    grad = np.empty_like(theta, dtype=float)
    grad[:p] = g_beta - beta * (w / SIGMA_SLAB**2 + (1.0 - w) / SIGMA_SPIKE**2)
    grad[p] = float(np.sum(w - pi)) - (PI_BETA_B - 1.0) * pi + 1.0 - 2.0 * pi
    grad[p + 1] = g_log_sigma + d_sigma + 1.0
    return float(logp), grad


class HorseshoeDraws(NamedTuple):
    beta: np.ndarray
    lam: np.ndarray
    tau: np.ndarray
    sigma: np.ndarray


class SpikeSlabDraws(NamedTuple):
    beta: np.ndarray
    pi: np.ndarray
    sigma: np.ndarray


class HorseshoeModel:
    """
    Horseshoe regression on (x, y): beta_j = eta_j * lambda_j * tau with
    lambda_j ~ C+(0, 1), tau ~ C+(0, tau0) and sigma ~ C+(0, 2).
    """

    def __init__(self, x: np.ndarray, y: np.ndarray):
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.p = self.x.shape[1]

    @property
    def dim(self) -> int:
        return 2 * self.p + 2

    def logp_grad(self, theta: np.ndarray) -> Tuple[float, np.ndarray]:
        return horseshoe_logp_grad(theta, self.x, self.y)

    def target(self) -> TargetDensity:
        return TargetDensity(dim=self.dim, logp_grad=self.logp_grad)

    def initial_point(self) -> np.ndarray:
        return np.zeros(self.dim)

    def constrain(self, draws: np.ndarray) -> HorseshoeDraws:
        p = self.p
        lam = to_positive(draws[..., p : 2 * p])
        tau = to_positive(draws[..., 2 * p])
        beta = draws[..., :p] * lam * tau[..., None]
        return HorseshoeDraws(beta=beta, lam=lam, tau=tau, sigma=to_positive(draws[..., 2 * p + 1]))


class SpikeSlabModel:
    """
    Spike-and-Slab regression with the inclusion indicators summed out.
    """

    def __init__(self, x: np.ndarray, y: np.ndarray):
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.p = self.x.shape[1]

    @property
    def dim(self) -> int:
        return self.p + 2

    def logp_grad(self, theta: np.ndarray) -> Tuple[float, np.ndarray]:
        return spike_slab_logp_grad(theta, self.x, self.y)

    def target(self) -> TargetDensity:
        return TargetDensity(dim=self.dim, logp_grad=self.logp_grad)

    def initial_point(self) -> np.ndarray:
        return np.zeros(self.dim)

    def constrain(self, draws: np.ndarray) -> SpikeSlabDraws:
        p = self.p
        return SpikeSlabDraws(
            beta=draws[..., :p],
            pi=to_unit(draws[..., p]),
            sigma=to_positive(draws[..., p + 1]),
        )


BayesModel = Union[HorseshoeModel, SpikeSlabModel]

_MODELS = {
    ModelKind.HORSESHOE: HorseshoeModel,
    ModelKind.SPIKE_SLAB: SpikeSlabModel,
}


def build_model(kind: ModelKind, x: np.ndarray, y: np.ndarray) -> BayesModel:
    try:
        return _MODELS[ModelKind(kind)](x, y)
    except KeyError:
        raise ValueError(f"{kind} is not a Bayesian model") from None


def hdi(samples: np.ndarray, prob: float = HDI_PROB) -> Tuple[float, float]:
    """
    Narrowest interval spanning ceil(prob * N) consecutive sorted draws.
    Ties go to the earliest window.
    """
    draws = np.sort(np.asarray(samples, dtype=float).ravel())
    n = draws.shape[0]
    if n == 0:
        raise ValueError("hdi needs at least one draw")
    if not 0 < prob < 1:
        raise ValueError(f"prob must lie in (0, 1), got {prob}")
    minimum = math.ceil(1.0 / (1.0 - prob) - 1e-9)
    if n < minimum:
        raise ValueError(f"hdi at prob={prob} needs at least {minimum} draws, got {n}")

    m = math.ceil(prob * n - 1e-9)
    widths = draws[m - 1 :] - draws[: n - m + 1]
    start = int(np.argmin(widths))
    return float(draws[start]), float(draws[start + m - 1])


def summarize(beta_draws: np.ndarray, prob: float = HDI_PROB) -> list:
    """Posterior mean and HDI per coefficient of a (draws, p) array."""
    summaries = []
    for column in beta_draws.T:
        low, high = hdi(column, prob)
        summaries.append(CoefficientSummary(mean=float(column.mean()), hdi_low=low, hdi_high=high))
    return summaries


def fit_model(model: BayesModel, config: SamplerConfig, name: Optional[str] = None) -> FitResult:
    """
    Sample ``model`` and summarize its coefficients on the constrained scale.
    """
    start = time.perf_counter()
    draws = run_chains(model.target(), config, initial_point=model.initial_point())
    beta = model.constrain(draws.samples).beta
    flat = beta.reshape(-1, model.p)
    summaries = summarize(flat)
    beta_hat = np.array([s.mean for s in summaries])
    fit_time = time.perf_counter() - start

    label = name or type(model).__name__
    rhat_max: Optional[float] = None
    try:
        rhat_max = float(np.max(split_rhat(draws.samples)))
    except ValueError as e:
        logger.warning(f"{label}: split R-hat unavailable ({e})")
    if rhat_max is not None and rhat_max > RHAT_WARN:
        logger.warning(f"{label}: split R-hat {rhat_max:.3f} exceeds {RHAT_WARN}")

    divergences = draws.total_divergences
    if divergences:
        logger.warning(f"{label}: {divergences} divergent transitions after warmup")
    logger.debug(
        f"{label}: step sizes {np.round(draws.step_sizes, 4).tolist()}, "
        f"mean accept {draws.accept_stat_mean.tolist()}"
    )

    return FitResult(
        beta_hat=beta_hat,
        fit_time=fit_time,
        posterior=summaries,
        divergences=divergences,
        rhat_max=rhat_max,
    )


def fit_bayes(kind: ModelKind, dataset: Dataset, config: SamplerConfig) -> FitResult:
    """
    Fit a Horseshoe or Spike-and-Slab posterior on the training fold.

    The chains run one after another (see ``run_chains``); the harness runs
    whole experiments in parallel instead. Sampler aborts propagate; a large
    split R-hat is only logged.
    """
    model = build_model(kind, dataset.x_train, dataset.y_train)
    try:
        return fit_model(model, config, name=f"{ModelKind(kind).value} on {dataset.name}")
    except BenchError:
        logger.error(f"Sampling failed for {ModelKind(kind).value} on {dataset.name}")
        raise
