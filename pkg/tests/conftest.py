import numpy as np
import pytest

# filled by test_acceptance.report(); printed once at the end of the session
ACCEPTANCE_LINES = {}

from bergsim.frames import Blaschke, Frame, Poly, constant


def one_z(n=2):
    """The frame (1, z)^T."""
    return Frame([[constant(1)], [Poly((0, 1))]], n=n)


def eps_blaschke(eps, a=0.5, n=2):
    return Frame([[constant(eps)], [Blaschke(a)]], n=n)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
