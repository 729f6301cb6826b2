import numpy as np
import pytest

from helical_vortex.geometry import HelixSpec
from helical_vortex.problem import helical_problem
from helical_vortex.profile import solve_profile


@pytest.fixture(scope="session")
def profile2():
    return solve_profile(2.0)


@pytest.fixture(scope="session")
def helix():
    return HelixSpec()


@pytest.fixture(scope="session")
def hproblem(helix):
    return helical_problem(helix)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
