import numpy as np
import pytest

from concset.geometry import default_instance
from concset.spectrum import spectral_basis


@pytest.fixture(scope="session")
def inst256():
    grid, M = default_instance(256, 256)
    return grid, M, spectral_basis(grid, M)


@pytest.fixture(scope="session")
def inst64():
    grid, M = default_instance(64, 64)
    return grid, M, spectral_basis(grid, M)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: dict = {}


@pytest.fixture(scope="session")
def acceptance_log():
    """Criterion number -> one-line verdict, echoed in the terminal summary."""
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
