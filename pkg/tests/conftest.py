import numpy as np
import pytest

from elliptlab.geometry import build_disc_mesh


@pytest.fixture(scope="session")
def mesh8():
    return build_disc_mesh(8)


@pytest.fixture(scope="session")
def mesh16():
    return build_disc_mesh(16)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
