import numpy as np
import pytest

from fracp_lab.energy import Problem
from fracp_lab.grid import Domain, ProblemParams

ACCEPTANCE_LINES = []


def record(criterion: str, ok: bool, detail: str = ""):
    """Remember one acceptance line for the terminal summary."""
    line = f"{'PASS' if ok else 'FAIL'} [{criterion}] {detail}".rstrip()
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def p2_params():
    return ProblemParams(1, 0.3, 2.0, 1.5, 0.01)


@pytest.fixture(scope="session")
def prob64(p2_params):
    return Problem.build(p2_params, Domain.interval(0.0, 1.0), 64)


@pytest.fixture(scope="session")
def prob128(p2_params):
    return Problem.build(p2_params, Domain.interval(0.0, 1.0), 128)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
