import pytest

from spherefield.covariance import CovarianceModel


@pytest.fixture
def two_pole():
    """l in {0, 2}, long memory at l=0."""
    return CovarianceModel.from_shares({0: (0.5, 0.3), 2: (0.5, 0.8)})


@pytest.fixture
def first_chaos_model():
    return CovarianceModel.from_shares({0: (0.05, 0.3), 1: (0.95, 0.8)})


@pytest.fixture
def rosenblatt_model():
    return CovarianceModel.from_shares({0: (0.1, 1.0, 2.0), 1: (0.9, 0.2)})


@pytest.fixture
def short_memory_model():
    return CovarianceModel.from_shares({0: (0.5, 1.0, 2.0), 1: (0.5, 0.8)})


def pytest_terminal_summary(terminalreporter):
    from _acceptance_log import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
