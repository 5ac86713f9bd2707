from pathlib import Path

import pytest

from sparsebench.core.config import Settings, load_settings
from sparsebench.core.exceptions import ConfigError
from sparsebench.schemas.experiment import DatasetKind, ModelKind

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


def test_defaults():
    settings = Settings()
    assert settings.RHOS == [0.0, 0.3, 0.6, 0.9]
    assert settings.SNRS == [0.5, 1.0, 2.0, 5.0]
    assert settings.PS == [20, 50, 100]
    assert settings.SEEDS == [42, 123, 456, 789, 1024]
    assert settings.MODELS == list(ModelKind)


def test_sampler_config():
    config = Settings(SAMPLER_WARMUP=500, SAMPLER_DRAWS=1000).sampler_config(seed=9)
    assert (config.warmup, config.draws, config.seed, config.chains) == (500, 1000, 9, 2)
    assert config.target_accept == 0.95


def test_mini_grid_file():
    settings = load_settings(CONFIG_DIR / "mini_grid.env")
    assert settings.DATASETS == [DatasetKind.INDEPENDENT, DatasetKind.BLOCK]
    assert settings.RHOS == [0.3, 0.9]
    assert settings.SNRS == [0.5, 2.0]
    assert settings.PS == [20]
    assert settings.SAMPLER_WARMUP == 500


def test_full_grid_file():
    settings = load_settings(CONFIG_DIR / "full_grid.env")
    assert settings.BAYES_AT_P100 is False
    assert settings.SAMPLER_DRAWS == 2000


def test_overrides_win(tmp_path):
    path = tmp_path / "run.env"
    path.write_text("PS=[50]\nSEEDS=[1]\n")
    settings = load_settings(path, SEEDS=[7, 8])
    assert settings.PS == [50]
    assert settings.SEEDS == [7, 8]


def test_jobs_from_environment(monkeypatch):
    monkeypatch.setenv("JOBS", "3")
    assert Settings().JOBS == 3


def test_missing_file():
    with pytest.raises(ConfigError, match="not found"):
        load_settings("/nonexistent/run.env")


@pytest.mark.parametrize(
    "content",
    ["RHOS=[1.2]\n", "SNRS=[0]\n", "PS=[3]\n", "SEEDS=[]\n", "MODELS=[\"gbm\"]\n", "COLOUR=red\n"],
)
def test_invalid_file(tmp_path, content):
    path = tmp_path / "bad.env"
    path.write_text(content)
    with pytest.raises(ConfigError):
        load_settings(path)
