import warnings

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(autouse=True)
def _quiet_floor_warnings():
    # estimator floor warnings are asserted explicitly where they matter
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*zero density estimate.*")
        yield


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
