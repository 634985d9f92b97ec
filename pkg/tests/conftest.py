import numpy as np
import pytest

from topoalign.kernel import make_kernel


@pytest.fixture(scope="session")
def uniform():
    return make_kernel("uniform")


@pytest.fixture(scope="session")
def linear():
    return make_kernel("linear")


@pytest.fixture(scope="session")
def example():
    return make_kernel("paper_example")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in RESULTS:
        terminalreporter.write_line(line)
