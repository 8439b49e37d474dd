import numpy as np
import pytest

from mobiplan import kernels
from mobiplan.kinematics import default_chain


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # compile the hot kernels once so per-test timings are not skewed
    kernels.warmup()


@pytest.fixture(scope="session")
def chain():
    return default_chain()


@pytest.fixture
def rng():
    return np.random.default_rng(42)
