import os
from pathlib import Path
from typing import List, Optional, Union

from dotenv import load_dotenv
from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from sparsebench.core.exceptions import ConfigError
from sparsebench.schemas.experiment import DatasetKind, ModelKind
from sparsebench.schemas.sampler import SamplerConfig

# Load environment variables from .env file
load_dotenv()


class Settings(BaseSettings):
    """
    Benchmark settings.

    A run config is a flat KEY=VALUE file with the same keys; list-valued keys
    take JSON arrays, e.g. ``SNRS=[0.5, 2.0]``.
    """

    model_config = SettingsConfigDict(extra="forbid")

    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")

    # Experimental grid
    DATASETS: List[DatasetKind] = [
        DatasetKind.INDEPENDENT,
        DatasetKind.BLOCK,
        DatasetKind.TOEPLITZ,
    ]
    MODELS: List[ModelKind] = list(ModelKind)
    RHOS: List[float] = [0.0, 0.3, 0.6, 0.9]
    SNRS: List[float] = [0.5, 1.0, 2.0, 5.0]
    PS: List[int] = [20, 50, 100]
    SEEDS: List[int] = [42, 123, 456, 789, 1024]
    BASE_SEED: int = 0
    BAYES_AT_P100: bool = False

    # Real data
    DIABETES_PATH: Optional[str] = os.getenv("DIABETES_PATH")

    # Execution
    JOBS: int = Field(int(os.getenv("SPARSEBENCH_JOBS", "1")), ge=1)

    # Sampler
    SAMPLER_CHAINS: int = Field(2, ge=1)
    SAMPLER_WARMUP: int = Field(1000, ge=1)
    SAMPLER_DRAWS: int = Field(2000, ge=1)
    SAMPLER_TARGET_ACCEPT: float = Field(0.95, gt=0, lt=1)
    SAMPLER_MAX_TREE_DEPTH: int = Field(10, ge=1)

    # Classical solvers
    CV_FOLDS: int = Field(5, ge=2)
    CD_TOL: float = Field(1e-7, gt=0)
    CD_MAX_ITER: int = Field(10_000, ge=1)

    @field_validator("DATASETS", "MODELS", "RHOS", "SNRS", "PS", "SEEDS")
    @classmethod
    def _non_empty(cls, values):
        if not values:
            raise ValueError("grid axes must not be empty")
        return values

    @field_validator("RHOS")
    @classmethod
    def _rho_range(cls, values):
        if any(not 0.0 <= rho < 1.0 for rho in values):
            raise ValueError("RHOS values must lie in [0, 1)")
        return values

    @field_validator("SNRS")
    @classmethod
    def _snr_positive(cls, values):
        if any(snr <= 0 for snr in values):
            raise ValueError("SNRS values must be positive")
        return values

    @field_validator("PS")
    @classmethod
    def _p_minimum(cls, values):
        if any(p < 5 for p in values):
            raise ValueError("PS values must be at least 5")
        return values

    def sampler_config(self, seed: int) -> SamplerConfig:
        return SamplerConfig(
            chains=self.SAMPLER_CHAINS,
            warmup=self.SAMPLER_WARMUP,
            draws=self.SAMPLER_DRAWS,
            target_accept=self.SAMPLER_TARGET_ACCEPT,
            max_tree_depth=self.SAMPLER_MAX_TREE_DEPTH,
            seed=seed,
        )


def load_settings(path: Optional[Union[str, Path]] = None, **overrides) -> Settings:
    """
    Load settings from a KEY=VALUE config file (environment variables win).
    """
    if path is None:
        try:
            return Settings(**overrides)
        except ValueError as e:
            raise ConfigError(f"Invalid settings: {e}") from e

    config_path = Path(path)
    if not config_path.is_file():
        raise ConfigError(f"Config file not found: {config_path}")
    try:
        config_path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Config file unreadable: {config_path} ({e})") from e

    try:
        return Settings(_env_file=str(config_path), **overrides)
    except ValueError as e:
        raise ConfigError(f"Invalid config {config_path}: {e}") from e


# Create global settings object
settings = Settings()
