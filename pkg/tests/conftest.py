import numpy as np
import pytest

from sdfreg.procedural import bar, bend_bar, box, icosphere, open_box

# One line per acceptance criterion, filled in by tests/test_acceptance.py and
# echoed after the run (pytest captures stdout during the tests themselves).
acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def sphere162():
    return icosphere(2)


@pytest.fixture(scope="session")
def sphere642():
    return icosphere(3)


@pytest.fixture(scope="session")
def sphere42():
    return icosphere(1)


@pytest.fixture(scope="session")
def unit_cube():
    return box()


@pytest.fixture(scope="session")
def holey_box():
    return open_box(segments=(4, 4, 4))


@pytest.fixture(scope="session")
def straight_bar():
    return bar()


@pytest.fixture(scope="session")
def bent_bar(straight_bar):
    return bend_bar(straight_bar, 40.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
