"""
Shared fixtures and the `slow` marker for the co-BPM test suite
"""
import sys
from pathlib import Path

import numpy as np
import pytest

# Add the project root to the Python path
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from src.models.sample_data import Sample


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run long replication tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running replication test (enable with --runslow)")


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
def uniform_pair(rng):
    """Two independent uniform samples in the unit square"""
    return Sample(rng.random((200, 2)), label="X"), Sample(rng.random((150, 2)), label="Y")


@pytest.fixture
def separated_1d():
    """Fifteen points per sample, X concentrated left and Y right"""
    x = np.concatenate([np.linspace(0.03, 0.47, 11), np.linspace(0.55, 0.95, 4)])
    y = np.concatenate([np.linspace(0.05, 0.45, 4), np.linspace(0.52, 0.97, 11)])
    return Sample(x.reshape(-1, 1), label="X"), Sample(y.reshape(-1, 1), label="Y")


@pytest.fixture
def empty_pair():
    return Sample(np.empty((0, 2)), label="X"), Sample(np.empty((0, 2)), label="Y")
