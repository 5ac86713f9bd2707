"""
No-U-Turn sampler with multinomial trajectory sampling, an identity mass matrix
and dual-averaging step-size adaptation.

Targets are supplied as ``TargetDensity`` objects mapping an unconstrained point
to ``(log density, gradient)``. Non-finite values mark a divergent transition
rather than raising.
"""

import logging
import math
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from sparsebench.core.exceptions import SamplerAbort
from sparsebench.core.rng import spawn_rngs
from sparsebench.schemas.sampler import PosteriorDraws, SamplerConfig, TargetDensity

logger = logging.getLogger(__name__)

DIVERGENCE_THRESHOLD = 1000.0
MAX_INIT_ATTEMPTS = 100
MAX_STEP_SEARCH = 100


class PhasePoint(NamedTuple):
    q: np.ndarray
    p: np.ndarray
    logp: float
    grad: np.ndarray

    @property
    def energy(self) -> float:
        return -self.logp + 0.5 * float(self.p @ self.p)


def _evaluate(target: TargetDensity, q: np.ndarray) -> Tuple[float, np.ndarray]:
    try:
        with np.errstate(all="ignore"):
            logp, grad = target.logp_grad(q)
        logp = float(logp)
    except (OverflowError, ZeroDivisionError, FloatingPointError):
        return -math.inf, np.zeros_like(q)
    if not math.isfinite(logp) or not np.all(np.isfinite(grad)):
        return -math.inf, np.zeros_like(q)
    return logp, grad


def leapfrog(
    point: np.ndarray,
    momentum: np.ndarray,
    step_size: float,
    target: TargetDensity,
    grad: Optional[np.ndarray] = None,
) -> PhasePoint:
    """
    One leapfrog step (half momentum, full position, half momentum).

    A non-finite log density at the proposal comes back as ``logp = -inf``.
    """
    if grad is None:
        _, grad = _evaluate(target, point)
    with np.errstate(all="ignore"):
        p_half = momentum + 0.5 * step_size * grad
        q_new = point + step_size * p_half
    logp_new, grad_new = _evaluate(target, q_new)
    p_new = p_half + 0.5 * step_size * grad_new
    return PhasePoint(q=q_new, p=p_new, logp=logp_new, grad=grad_new)


class _Subtree(NamedTuple):
    first: PhasePoint  # earliest point in build order
    last: PhasePoint
    proposal: PhasePoint
    log_weight: float
    rho: np.ndarray  # summed momenta
    turning: bool
    diverging: bool
    sum_accept: float
    n_steps: int


class Transition(NamedTuple):
    point: PhasePoint
    accept_stat: float
    divergent: bool
    tree_depth: int
    n_steps: int


def _no_u_turn(p_begin: np.ndarray, p_end: np.ndarray, rho: np.ndarray) -> bool:
    return float(p_begin @ rho) > 0 and float(p_end @ rho) > 0


def _merged_turning(init: _Subtree, final: _Subtree, rho: np.ndarray) -> bool:
    # The whole span plus the two checks across the seam between the halves
    if not _no_u_turn(init.first.p, final.last.p, rho):
        return True
    if not _no_u_turn(init.first.p, final.first.p, init.rho + final.first.p):
        return True
    return not _no_u_turn(init.last.p, final.last.p, final.rho + init.last.p)


class NUTSSampler:
    """
    Single-chain NUTS kernel bound to a target and a tree-depth limit.
    """

    def __init__(self, target: TargetDensity, max_tree_depth: int = 10):
        self.target = target
        self.max_tree_depth = max_tree_depth

    def _build_tree(
        self,
        edge: PhasePoint,
        direction: int,
        depth: int,
        step_size: float,
        h0: float,
        rng: np.random.Generator,
    ) -> _Subtree:
        if depth == 0:
            new = leapfrog(edge.q, edge.p, direction * step_size, self.target, edge.grad)
            energy = new.energy
            if not math.isfinite(energy):
                return _Subtree(new, new, new, -math.inf, new.p, False, True, 0.0, 1)
            delta = h0 - energy
            return _Subtree(
                first=new,
                last=new,
                proposal=new,
                log_weight=delta,
                rho=new.p,
                turning=False,
                diverging=-delta > DIVERGENCE_THRESHOLD,
                sum_accept=min(1.0, math.exp(min(delta, 0.0))),
                n_steps=1,
            )

        init = self._build_tree(edge, direction, depth - 1, step_size, h0, rng)
        if init.turning or init.diverging:
            return init
        final = self._build_tree(init.last, direction, depth - 1, step_size, h0, rng)

        log_weight = np.logaddexp(init.log_weight, final.log_weight)
        proposal = init.proposal
        # Multinomial choice within the subtree
        if math.log(rng.uniform()) < final.log_weight - log_weight:
            proposal = final.proposal

        rho = init.rho + final.rho
        turning = final.turning or (
            not final.diverging and _merged_turning(init, final, rho)
        )
        return _Subtree(
            first=init.first,
            last=final.last,
            proposal=proposal,
            log_weight=float(log_weight),
            rho=rho,
            turning=turning,
            diverging=final.diverging,
            sum_accept=init.sum_accept + final.sum_accept,
            n_steps=init.n_steps + final.n_steps,
        )

    def transition(
        self, current: PhasePoint, step_size: float, rng: np.random.Generator
    ) -> Transition:
        """
        One NUTS transition from ``current`` (momentum is resampled here).
        """
        momentum = rng.standard_normal(current.q.shape[0])
        start = current._replace(p=momentum)
        h0 = start.energy

        left = right = start
        proposal = start
        log_weight = 0.0
        rho = momentum.copy()
        sum_accept, n_steps = 0.0, 0
        divergent = False
        depth = 0

        while depth < self.max_tree_depth:
            direction = 1 if rng.uniform() < 0.5 else -1
            edge = right if direction > 0 else left
            sub = self._build_tree(edge, direction, depth, step_size, h0, rng)
            sum_accept += sub.sum_accept
            n_steps += sub.n_steps
            depth += 1

            if sub.diverging:
                divergent = True
                break
            if sub.turning:
                break

            # Biased progressive sampling favours the new subtree
            if math.log(rng.uniform()) < sub.log_weight - log_weight:
                proposal = sub.proposal
            log_weight = float(np.logaddexp(log_weight, sub.log_weight))

            # Orient the old tree so that its end touches the new subtree
            if direction > 0:
                old_first, old_last = left, right
                right = sub.last
            else:
                old_first, old_last = right, left
                left = sub.last
            old = _Subtree(old_first, old_last, proposal, log_weight, rho, False, False, 0.0, 0)
            rho = rho + sub.rho
            if _merged_turning(old, sub, rho):
                break

        accept_stat = sum_accept / n_steps if n_steps else 0.0
        return Transition(
            point=proposal._replace(p=momentum),
            accept_stat=accept_stat,
            divergent=divergent,
            tree_depth=depth,
            n_steps=n_steps,
        )


def nuts_transition(
    current_point: np.ndarray,
    step_size: float,
    target: TargetDensity,
    rng: np.random.Generator,
    max_tree_depth: int = 10,
) -> Tuple[np.ndarray, float, bool, int]:
    """
    Functional form of one transition: returns (next_point, accept_stat, divergent, depth).
    """
    logp, grad = _evaluate(target, current_point)
    if not math.isfinite(logp):
        raise ValueError("current_point must have a finite log density")
    current = PhasePoint(q=current_point, p=np.zeros_like(current_point), logp=logp, grad=grad)
    result = NUTSSampler(target, max_tree_depth).transition(current, step_size, rng)
    return result.point.q, result.accept_stat, result.divergent, result.tree_depth


class DualAveraging:
    """
    Nesterov dual averaging on log step size, driven by the error
    ``target_accept - accept_stat``.

    The prox centre is log of the initial step size, so a stream with zero error
    leaves the step size where it started.
    """

    def __init__(
        self,
        initial_step_size: float,
        target_accept: float,
        gamma: float = 0.05,
        t0: float = 10.0,
        kappa: float = 0.75,
    ):
        self.mu = math.log(initial_step_size)
        self.target_accept = target_accept
        self.gamma = gamma
        self.t0 = t0
        self.kappa = kappa
        self._t = 0
        self._error_avg = 0.0
        self._log_step = self.mu
        self._log_step_avg = 0.0

    def update(self, accept_stat: float) -> float:
        """Feed one accept statistic; returns the step size to use next."""
        self._t += 1
        t = self._t
        eta = 1.0 / (t + self.t0)
        self._error_avg = (1.0 - eta) * self._error_avg + eta * (self.target_accept - accept_stat)
        self._log_step = self.mu - math.sqrt(t) / self.gamma * self._error_avg
        weight = t ** (-self.kappa)
        self._log_step_avg = (1.0 - weight) * self._log_step_avg + weight * self._log_step
        return math.exp(self._log_step)

    @property
    def step_size(self) -> float:
        return math.exp(self._log_step)

    @property
    def final_step_size(self) -> float:
        """The averaged iterate, frozen after warmup."""
        if self._t == 0:
            return math.exp(self.mu)
        return math.exp(self._log_step_avg)


def dual_averaging_adapt(
    accept_stats: Sequence[float], target_accept: float, initial_step_size: float = 1.0
) -> float:
    """
    Run dual averaging over a stream of accept statistics and return the
    adapted (averaged) step size.
    """
    adapter = DualAveraging(initial_step_size, target_accept)
    for stat in accept_stats:
        adapter.update(stat)
    return adapter.final_step_size


def find_reasonable_step_size(
    current: PhasePoint, target: TargetDensity, rng: np.random.Generator
) -> float:
    """
    Double or halve the step size until a single leapfrog step's acceptance
    probability crosses 0.5.
    """
    step_size = 1.0
    momentum = rng.standard_normal(current.q.shape[0])
    h0 = current._replace(p=momentum).energy

    def log_accept(eps: float) -> float:
        new = leapfrog(current.q, momentum, eps, target, current.grad)
        energy = new.energy
        return h0 - energy if math.isfinite(energy) else -math.inf

    direction = 1 if log_accept(step_size) > math.log(0.5) else -1
    for _ in range(MAX_STEP_SEARCH):
        candidate = step_size * (2.0**direction)
        crossed = (log_accept(candidate) > math.log(0.5)) != (direction > 0)
        step_size = candidate
        if crossed:
            break
    return step_size


def _initial_point(
    target: TargetDensity, config: SamplerConfig, rng, center: Optional[np.ndarray] = None
) -> PhasePoint:
    center = np.zeros(target.dim) if center is None else np.asarray(center, dtype=float)
    if center.shape != (target.dim,):
        raise ValueError(f"initial point has shape {center.shape}, expected ({target.dim},)")
    for _ in range(MAX_INIT_ATTEMPTS):
        q = center + config.init_jitter * rng.standard_normal(target.dim)
        logp, grad = _evaluate(target, q)
        if math.isfinite(logp):
            return PhasePoint(q=q, p=np.zeros(target.dim), logp=logp, grad=grad)
    raise SamplerAbort(f"No finite starting point found in {MAX_INIT_ATTEMPTS} attempts")


class ChainResult(NamedTuple):
    draws: np.ndarray
    divergences: int
    warmup_divergences: int
    step_size: float
    accept_stat_mean: float
    tree_depth_mean: float


def run_chain(
    target: TargetDensity,
    config: SamplerConfig,
    rng: np.random.Generator,
    chain: int = 0,
    initial_point: Optional[np.ndarray] = None,
) -> ChainResult:
    """
    Warm up (adapting the step size) and then draw from one chain.
    """
    kernel = NUTSSampler(target, config.max_tree_depth)
    current = _initial_point(target, config, rng, initial_point)
    step_size = find_reasonable_step_size(current, target, rng)
    adapter = DualAveraging(step_size, config.target_accept)

    warmup_divergences = 0
    for _ in range(config.warmup):
        result = kernel.transition(current, step_size, rng)
        current = result.point
        warmup_divergences += result.divergent
        step_size = adapter.update(result.accept_stat)

    if warmup_divergences > config.max_warmup_divergence_rate * config.warmup:
        raise SamplerAbort(
            f"Chain {chain}: {warmup_divergences}/{config.warmup} warmup transitions "
            f"diverged; the posterior geometry defeats the sampler"
        )

    step_size = adapter.final_step_size
    draws = np.empty((config.draws, target.dim))
    divergences = 0
    accept_total = 0.0
    depth_total = 0
    for i in range(config.draws):
        result = kernel.transition(current, step_size, rng)
        current = result.point
        draws[i] = current.q
        divergences += result.divergent
        accept_total += result.accept_stat
        depth_total += result.tree_depth

    logger.debug(
        f"Chain {chain}: step size {step_size:.4g}, "
        f"mean accept {accept_total / config.draws:.3f}, divergences {divergences}"
    )
    return ChainResult(
        draws=draws,
        divergences=divergences,
        warmup_divergences=warmup_divergences,
        step_size=step_size,
        accept_stat_mean=accept_total / config.draws,
        tree_depth_mean=depth_total / config.draws,
    )


def run_chains(
    target: TargetDensity, config: SamplerConfig, initial_point: Optional[np.ndarray] = None
) -> PosteriorDraws:
    """
    Run ``config.chains`` independent chains with streams spawned from
    ``config.seed``; warmup draws are discarded.

    Each chain starts from ``initial_point`` (the origin by default) plus
    N(0, init_jitter^2) noise. Chains run one after another in this process:
    the harness already spreads experiments over worker processes, so a
    second pool per fit would only oversubscribe them. Every chain has its
    own stream, so the draws do not depend on execution order.
    """
    rngs = spawn_rngs(config.seed, config.chains)
    results: List[ChainResult] = [
        run_chain(target, config, rng, chain, initial_point) for chain, rng in enumerate(rngs)
    ]
    return PosteriorDraws(
        samples=np.stack([r.draws for r in results]),
        divergences=np.array([r.divergences for r in results]),
        warmup_divergences=np.array([r.warmup_divergences for r in results]),
        step_sizes=np.array([r.step_size for r in results]),
        accept_stat_mean=np.array([r.accept_stat_mean for r in results]),
        tree_depth_mean=np.array([r.tree_depth_mean for r in results]),
    )


def _segments(samples: np.ndarray) -> np.ndarray:
    chains, draws = samples.shape[:2]
    pieces = 2 if chains >= 2 else 4
    length = draws // pieces
    if length < 2:
        raise ValueError(
            f"Need at least {2 * pieces} draws per chain to split into segments, got {draws}"
        )
    # Odd leftovers are dropped from the front of each chain
    trimmed = samples[:, draws - pieces * length :]
    return trimmed.reshape((chains * pieces, length) + samples.shape[2:])


def split_rhat(samples: np.ndarray) -> np.ndarray:
    """
    Split-chain potential scale reduction per parameter.

    ``samples`` has shape (chains, draws) or (chains, draws, dim). Chains are
    halved; a single chain is cut into quarters so that at least four segments
    are compared.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim < 2:
        raise ValueError("samples must have shape (chains, draws[, dim])")
    segments = _segments(samples)
    length = segments.shape[1]

    within = np.mean(np.var(segments, axis=1, ddof=1), axis=0)
    between_over_n = np.var(np.mean(segments, axis=1), axis=0, ddof=1)
    pooled = (length - 1) / length * within + between_over_n

    with np.errstate(divide="ignore", invalid="ignore"):
        rhat = np.sqrt(pooled / within)
    rhat = np.where(within > 0, rhat, np.where(between_over_n > 0, np.inf, 1.0))
    return rhat
