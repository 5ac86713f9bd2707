from pydantic import BaseModel, ConfigDict, Field


class PredictionMetrics(BaseModel):
    model_config = ConfigDict(frozen=True)

    mse: float = Field(..., ge=0)
    rmse: float = Field(..., ge=0)


class CoefficientMetrics(BaseModel):
    model_config = ConfigDict(frozen=True)

    l2_error: float = Field(..., ge=0)
    coef_mse: float = Field(..., ge=0)


class SelectionMetrics(BaseModel):
    """
    Schema for support-recovery scores of a thresholded estimate.
    """

    model_config = ConfigDict(frozen=True)

    precision: float = Field(..., ge=0, le=1)
    recall: float = Field(..., ge=0, le=1)
    f1: float = Field(..., ge=0, le=1)
    support_size_hat: int = Field(..., ge=0)


class CalibrationMetrics(BaseModel):
    """
    Schema for interval calibration against the true coefficients.
    """

    model_config = ConfigDict(frozen=True)

    coverage: float = Field(..., ge=0, le=1)
    avg_width: float = Field(..., ge=0)
