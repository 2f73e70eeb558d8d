import numpy as np
import pytest

from netpen import GenerationConfig


@pytest.fixture(scope="session")
def default_config() -> GenerationConfig:
    """The standard benchmark parameterization."""
    return GenerationConfig()


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
