import numpy as np
import pytest

from puccisys.operators import barenblatt, laplacian, pucci
from puccisys.selfsim import default_grid, power_iterate

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def grid1d():
    return default_grid(1, 10.0, 0.05)


@pytest.fixture(scope="session")
def eigenpairs(grid1d):
    """Converged eigenpairs for the operators used across the suite (N = 1, h = 0.05, R = 10)."""
    ops = {
        "laplacian": laplacian(),
        "pucci+": pucci("+", 1, 2),
        "pucci-": pucci("-", 1, 2),
        "barenblatt": barenblatt(1 / 3),
    }
    return {k: (op, power_iterate(op, grid1d)) for k, op in ops.items()}


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
