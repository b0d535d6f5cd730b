import os
import tempfile

import numpy as np
import pytest

# settings and the engine are created at import time
_DB_DIR = tempfile.mkdtemp(prefix="tactile-ec-tests-")
os.environ.setdefault("DATABASE_URL", f"sqlite:///{os.path.join(_DB_DIR, 'test.db')}")
os.environ.setdefault("LOG_LEVEL", "WARNING")

from tactile_ec.core.config import NoiseProfile, SolverConfig  # noqa: E402
from tactile_ec.estimation.state import GraspParams  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run closed-loop acceptance tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def noise():
    return NoiseProfile.default()


@pytest.fixture
def solver_config():
    return SolverConfig(horizon=3, active_window=50, max_iterations=50)


@pytest.fixture
def grasp():
    return GraspParams(kappa=[2.0, 3.0, 1.0], k=[2000.0, 1500.0, 3000.0], eta=[0.0, 0.0, 0.01])
