import numpy as np
import pytest

from dflorenz.model3d import LorenzParams
from dflorenz.skew4d import HybridModel, SkewParams


@pytest.fixture(scope="session")
def model():
    return HybridModel()


@pytest.fixture(scope="session")
def wide_ear():
    """The ear constants c = 0.1, d = 0.2 used by several worked examples."""
    return LorenzParams(ear_c=0.1, ear_d=0.2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running numerical checks")
