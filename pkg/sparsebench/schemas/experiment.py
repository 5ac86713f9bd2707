from enum import Enum
from typing import Dict, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from sparsebench.schemas.data import CovarianceDesign


class DatasetKind(str, Enum):
    INDEPENDENT = "independent"
    BLOCK = "block"
    TOEPLITZ = "toeplitz"
    DIABETES = "diabetes"

    @property
    def is_synthetic(self) -> bool:
        return self is not DatasetKind.DIABETES

    @property
    def design(self) -> CovarianceDesign:
        if not self.is_synthetic:
            raise ValueError("the diabetes dataset has no covariance design")
        return CovarianceDesign(self.value)


class ModelKind(str, Enum):
    OLS = "ols"
    RIDGE = "ridge"
    LASSO = "lasso"
    ELASTIC_NET = "elastic_net"
    HORSESHOE = "horseshoe"
    SPIKE_SLAB = "spike_slab"

    @property
    def is_bayesian(self) -> bool:
        return self in (ModelKind.HORSESHOE, ModelKind.SPIKE_SLAB)


# Canonical axis order used for sorting specs and report rows
DATASET_ORDER: Tuple[DatasetKind, ...] = tuple(DatasetKind)
MODEL_ORDER: Tuple[ModelKind, ...] = tuple(ModelKind)


class ExperimentSpec(BaseModel):
    """
    Schema for one cell of the experimental grid.

    Diabetes specs carry placeholder axes (rho=0, snr=0, p=10).
    """

    model_config = ConfigDict(frozen=True)

    dataset: DatasetKind
    model: ModelKind
    rho: float = 0.0
    snr: float
    p: int
    seed: int

    @model_validator(mode="after")
    def _axes(self):
        if self.dataset is DatasetKind.INDEPENDENT and self.rho != 0.0:
            raise ValueError("rho is fixed at 0 for the independent design")
        if self.dataset.is_synthetic:
            if not 0.0 <= self.rho < 1.0:
                raise ValueError(f"rho must lie in [0, 1), got {self.rho}")
            if self.snr <= 0:
                raise ValueError(f"snr must be positive, got {self.snr}")
            if self.p < 5:
                raise ValueError(f"p must be at least 5, got {self.p}")
        return self

    def sort_key(self) -> tuple:
        return (
            DATASET_ORDER.index(self.dataset),
            MODEL_ORDER.index(self.model),
            self.rho,
            self.snr,
            self.p,
            self.seed,
        )

    def label(self) -> str:
        return (
            f"{self.dataset.value}/{self.model.value} "
            f"rho={self.rho} snr={self.snr} p={self.p} seed={self.seed}"
        )


CSV_COLUMNS: Tuple[str, ...] = (
    "dataset",
    "model",
    "rho",
    "snr",
    "p",
    "seed",
    "test_mse",
    "test_rmse",
    "coef_l2",
    "coef_mse",
    "precision",
    "recall",
    "f1",
    "coverage",
    "interval_width",
    "chosen_lambda",
    "chosen_alpha",
    "divergences",
    "fit_time_s",
    "error",
)

_FLOAT_FIELDS = {
    "rho",
    "snr",
    "test_mse",
    "test_rmse",
    "coef_l2",
    "coef_mse",
    "precision",
    "recall",
    "f1",
    "coverage",
    "interval_width",
    "chosen_lambda",
    "chosen_alpha",
    "fit_time_s",
}
_INT_FIELDS = {"p", "seed", "divergences"}


class ResultRow(BaseModel):
    """
    Schema for one persisted experiment result.

    Fields that do not apply (coefficient metrics on real data, calibration on
    classical models) stay ``None`` and serialize as empty cells.
    """

    model_config = ConfigDict(frozen=True)

    dataset: DatasetKind
    model: ModelKind
    rho: float
    snr: float
    p: int
    seed: int
    test_mse: Optional[float] = None
    test_rmse: Optional[float] = None
    coef_l2: Optional[float] = None
    coef_mse: Optional[float] = None
    precision: Optional[float] = None
    recall: Optional[float] = None
    f1: Optional[float] = None
    coverage: Optional[float] = None
    interval_width: Optional[float] = None
    chosen_lambda: Optional[float] = None
    chosen_alpha: Optional[float] = None
    divergences: Optional[int] = None
    fit_time_s: float = Field(0.0, ge=0)
    error: str = ""

    @classmethod
    def from_spec(cls, spec: ExperimentSpec, **fields) -> "ResultRow":
        return cls(
            dataset=spec.dataset,
            model=spec.model,
            rho=spec.rho,
            snr=spec.snr,
            p=spec.p,
            seed=spec.seed,
            **fields,
        )

    def spec(self) -> ExperimentSpec:
        return ExperimentSpec(
            dataset=self.dataset,
            model=self.model,
            rho=self.rho,
            snr=self.snr,
            p=self.p,
            seed=self.seed,
        )

    def to_record(self) -> Dict[str, str]:
        """
        Render every column as text; floats use their shortest round-trip form.
        """
        record = {}
        for column in CSV_COLUMNS:
            value = getattr(self, column)
            if value is None:
                record[column] = ""
            elif isinstance(value, Enum):
                record[column] = value.value
            elif column in _FLOAT_FIELDS:
                record[column] = repr(float(value))
            else:
                record[column] = str(value)
        return record

    @classmethod
    def from_record(cls, record: Dict[str, str]) -> "ResultRow":
        fields = {}
        for column in CSV_COLUMNS:
            text = record.get(column, "")
            if column == "error":
                fields[column] = text
            elif text == "":
                fields[column] = None
            elif column in _FLOAT_FIELDS:
                fields[column] = float(text)
            elif column in _INT_FIELDS:
                fields[column] = int(text)
            else:
                fields[column] = text
        return cls(**fields)
