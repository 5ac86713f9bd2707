from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class CovarianceDesign(str, Enum):
    INDEPENDENT = "independent"
    BLOCK = "block"
    TOEPLITZ = "toeplitz"


class CovarianceSpec(BaseModel):
    """
    Schema for a synthetic design covariance.

    Range checks on ``rho`` and ``p`` happen in ``build_covariance`` so that the
    error surfaces as a ``CovarianceError`` from the operation itself.
    """

    model_config = ConfigDict(frozen=True)

    design: CovarianceDesign = Field(..., description="Covariance structure")
    p: int = Field(..., description="Number of features")
    rho: float = Field(0.0, description="Correlation strength, 0 for independent")
    block_size: int = Field(5, ge=1, description="Block width for the block design")


class GroundTruth(BaseModel):
    """
    Schema for the generating coefficients of a synthetic dataset.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    beta_star: np.ndarray
    support: np.ndarray = Field(..., description="Sorted indices of nonzero beta_star")
    sigma: float = Field(..., gt=0)
    snr: float = Field(..., gt=0)


class Dataset(BaseModel):
    """
    Schema for a train/test regression problem. ``truth`` is absent for real data.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    truth: Optional[GroundTruth] = None
    name: str

    @property
    def n_train(self) -> int:
        return self.x_train.shape[0]

    @property
    def n_test(self) -> int:
        return self.x_test.shape[0]

    @property
    def p(self) -> int:
        return self.x_train.shape[1]
