import logging
import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
os.environ.setdefault('AAN_ENV', 'testing')

from config import Config  # noqa: E402
from models.run_config import RunConfig  # noqa: E402
from utils.phase_kernel import BasisSet, PhaseGrid  # noqa: E402


@pytest.fixture
def grid():
    return PhaseGrid(P=10, N=10)


@pytest.fixture
def basis(grid):
    return BasisSet(mu=5.0, grid=grid)


@pytest.fixture
def default_config():
    return RunConfig.from_file(Config.DEFAULT_RUN_CONFIG)


@pytest.fixture
def quick_config(default_config):
    return default_config.with_overrides({'protocol.preset': 'quick', 'seed': 3})


@pytest.fixture(autouse=True)
def _drop_cli_handlers():
    yield
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, '_aan_handler', False):
            root.removeHandler(handler)
