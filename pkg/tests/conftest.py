import numpy as np
import pytest

from sparsebench.core.config import Settings
from sparsebench.schemas.data import CovarianceDesign, CovarianceSpec
from sparsebench.schemas.sampler import TargetDensity
from sparsebench.services.datagen import generate_dataset


def pytest_addoption(parser):
    parser.addoption(
        "--runslow", action="store_true", default=False, help="run desk-scale reproduction tests"
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def gaussian_target(dim: int, scale: float = 1.0) -> TargetDensity:
    """Isotropic N(0, scale^2 I) target."""

    def logp_grad(q):
        return -0.5 * float(q @ q) / scale**2, -q / scale**2

    return TargetDensity(dim=dim, logp_grad=logp_grad)


def finite_difference_grad(f, theta, h=1e-5):
    grad = np.empty_like(theta)
    for i in range(theta.shape[0]):
        step = np.zeros_like(theta)
        step[i] = h
        grad[i] = (f(theta + step)[0] - f(theta - step)[0]) / (2 * h)
    return grad


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def small_dataset():
    spec = CovarianceSpec(design=CovarianceDesign.TOEPLITZ, p=10, rho=0.5)
    return generate_dataset(spec, snr=2.0, seed=7)


@pytest.fixture
def tiny_settings():
    """A two-model grid with a sampler budget small enough for unit tests."""
    return Settings(
        DATASETS=["independent"],
        MODELS=["ols", "lasso"],
        RHOS=[0.0],
        SNRS=[0.5, 2.0],
        PS=[20],
        SEEDS=[42, 123, 456],
        SAMPLER_CHAINS=1,
        SAMPLER_WARMUP=100,
        SAMPLER_DRAWS=200,
        JOBS=1,
    )
