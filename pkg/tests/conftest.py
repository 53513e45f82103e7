import numpy as np
import pytest

from qndcavity.model import SystemParams, build_space

from helpers import ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def protocol_params():
    return SystemParams(g=0.5, epsilon=0.05 * 0.5)


@pytest.fixture
def space4():
    return build_space(4)
