import numpy as np
import pytest

from fracpde import Exosystem, Grid, PhysicalParams


@pytest.fixture
def params():
    return PhysicalParams(k0=1.0)


@pytest.fixture
def small_grid():
    return Grid(nx=41, nt=201, T=0.5)


@pytest.fixture
def demo_exo():
    S = np.zeros((3, 3))
    S[0, 0] = -25.0
    S[1, 2], S[2, 1] = 2 * np.pi, -2 * np.pi
    return Exosystem(S, [1.0, 0.0, 1.0], a=[1, 0, 0], b=[1, 0, 0], c=[0, 1, 0])


def pytest_terminal_summary(terminalreporter):
    try:
        from tests.test_acceptance import RESULTS
    except ImportError:
        import sys

        mod = sys.modules.get("test_acceptance")
        RESULTS = getattr(mod, "RESULTS", {})
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
