import sys
import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def triangle():
    # three nodes, pairwise paths; products 0.72, 0.63, 0.56 come from g = (0.8, 0.9, 0.7)
    paths = [{0, 1}, {1, 2}, {0, 2}]
    return paths, [0.72, 0.63, 0.56], np.array([0.8, 0.9, 0.7])


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    verdicts = getattr(mod, "VERDICTS", None)
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for line in verdicts:
        terminalreporter.write_line(line)
