from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class PenaltyConfig(BaseModel):
    """
    Schema for an Elastic-Net penalty: ``lam * (alpha*|b|_1 + (1-alpha)*|b|_2^2)``.
    """

    model_config = ConfigDict(frozen=True)

    lam: float = Field(..., ge=0, description="Regularization strength")
    alpha: float = Field(1.0, ge=0, le=1, description="l1 mixing weight")


class CvPlan(BaseModel):
    """
    Schema for a K-fold cross-validation plan over (alpha, lambda).

    When ``lambda_grid`` is omitted each alpha gets a data-driven path of
    ``n_lambdas`` log-spaced values from lambda_max/alpha down to
    ``lambda_ratio`` times that.
    """

    model_config = ConfigDict(frozen=True)

    n_folds: int = Field(5, ge=2)
    lambda_grid: Optional[Tuple[float, ...]] = None
    alpha_grid: Tuple[float, ...] = (1.0,)
    fold_seed: int = 0
    n_lambdas: int = Field(100, ge=1)
    lambda_ratio: float = Field(1e-3, gt=0, lt=1)

    @field_validator("lambda_grid")
    @classmethod
    def _descending(cls, grid):
        if grid is None:
            return grid
        if not grid or any(v <= 0 for v in grid):
            raise ValueError("lambda_grid must contain positive values")
        if any(a <= b for a, b in zip(grid, grid[1:])):
            raise ValueError("lambda_grid must be strictly descending")
        return grid

    @field_validator("alpha_grid")
    @classmethod
    def _alphas_in_range(cls, grid):
        if not grid:
            raise ValueError("alpha_grid must not be empty")
        if any(not 0 < a <= 1 for a in grid):
            raise ValueError("alpha_grid values must lie in (0, 1]")
        return grid


class CoefficientSummary(BaseModel):
    """
    Schema for a per-coefficient posterior summary (mean and 95% HDI).
    """

    model_config = ConfigDict(frozen=True)

    mean: float
    hdi_low: float
    hdi_high: float

    @model_validator(mode="after")
    def _ordered(self):
        if self.hdi_low > self.hdi_high:
            raise ValueError("hdi_low must not exceed hdi_high")
        return self

    @property
    def width(self) -> float:
        return self.hdi_high - self.hdi_low


class FitResult(BaseModel):
    """
    Schema for the common result of every estimator.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    beta_hat: np.ndarray
    chosen_penalty: Optional[PenaltyConfig] = None
    fit_time: float = Field(0.0, ge=0, description="Wall-clock seconds of the fit call")
    posterior: Optional[List[CoefficientSummary]] = None
    converged: bool = True
    divergences: Optional[int] = None
    rhat_max: Optional[float] = None

    @field_validator("beta_hat")
    @classmethod
    def _finite(cls, beta):
        if not np.all(np.isfinite(beta)):
            raise ValueError("beta_hat must be finite")
        return beta
