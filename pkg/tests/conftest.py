"""
Standard pytest fixtures and hooks definition file.
"""
# pylint: disable=redefined-outer-name
from pathlib import Path

import pytest
from _pytest.config.argparsing import Parser
from _pytest.fixtures import SubRequest

from optspace.mc_synth import SynthInstance, generate
from optspace.mc_utils import set_logger
from tests import McSutUtils


def pytest_addoption(parser: Parser) -> None:
    """Add options to allow the user to select the experiment file and the log level."""
    parser.addoption("--mc-config", action="store", default=Path(__file__).parent.joinpath("experiment.yaml").as_posix())
    parser.addoption("--mc-log-level", action="store", default="INFO", help="Logging level")


@pytest.fixture(scope="session", autouse=True)
def log_level(request: SubRequest) -> str:
    """Set the package logger level from the command line."""
    level = request.config.getoption("--mc-log-level")
    set_logger(level)
    return level


@pytest.fixture(scope="session")
def sut_utils(request: SubRequest) -> McSutUtils:
    """Yield the test scale settings from the experiment file."""
    return McSutUtils.from_file(request.config.getoption("--mc-config"))


@pytest.fixture
def small_instance() -> SynthInstance:
    """Yield a noisy 30x24 rank 2 instance with half the entries observed."""
    return generate(30, 24, 2, 0.01, 0.5, seed=7)


@pytest.fixture
def noiseless_instance() -> SynthInstance:
    """Yield a noiseless 60x50 rank 2 instance with 60% of the entries observed."""
    return generate(60, 50, 2, 0.0, 0.6, seed=3)
