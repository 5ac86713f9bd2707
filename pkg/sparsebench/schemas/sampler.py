from typing import Callable, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

LogpGrad = Callable[[np.ndarray], Tuple[float, np.ndarray]]


class TargetDensity(BaseModel):
    """
    Schema for an unconstrained target: a point maps to (log-density, gradient).

    ``logp_grad`` must be a deterministic, re-entrant function of the point.
    """

    model_config = ConfigDict(frozen=True)

    dim: int = Field(..., ge=1)
    logp_grad: LogpGrad


class SamplerConfig(BaseModel):
    """
    Schema for NUTS run settings.
    """

    model_config = ConfigDict(frozen=True)

    chains: int = Field(2, ge=1)
    warmup: int = Field(1000, ge=1)
    draws: int = Field(2000, ge=1)
    target_accept: float = Field(0.95, gt=0, lt=1)
    max_tree_depth: int = Field(10, ge=1)
    seed: int = 0
    init_jitter: float = Field(0.1, gt=0, description="Std of the Gaussian jitter around the chain start")
    max_warmup_divergence_rate: float = Field(0.9, gt=0, le=1)


class PosteriorDraws(BaseModel):
    """
    Schema for post-warmup draws in unconstrained space, shape (chains, draws, dim).
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    samples: np.ndarray
    divergences: np.ndarray = Field(..., description="Post-warmup divergent transitions per chain")
    warmup_divergences: np.ndarray
    step_sizes: np.ndarray = Field(..., description="Adapted step size per chain")
    accept_stat_mean: np.ndarray = Field(..., description="Mean post-warmup accept statistic per chain")
    tree_depth_mean: np.ndarray

    @model_validator(mode="after")
    def _consistent(self):
        if self.samples.ndim != 3:
            raise ValueError("samples must have shape (chains, draws, dim)")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")
        if np.any(self.accept_stat_mean < 0) or np.any(self.accept_stat_mean > 1):
            raise ValueError("accept_stat_mean must lie in [0, 1]")
        return self

    @property
    def total_divergences(self) -> int:
        return int(np.sum(self.divergences))
