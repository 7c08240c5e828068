import pytest

from nsp.thresholds import self_normalised_quantile

_verdicts = []


def record_verdict(line: str) -> None:
    _verdicts.append(line)


def pytest_terminal_summary(terminalreporter):
    if _verdicts:
        terminalreporter.section("acceptance criteria")
        for line in _verdicts:
            terminalreporter.line(line)


@pytest.fixture(scope="session")
def sn_quantile_01():
    """Level-0.1 self-normalised quantile, simulated once per session."""
    return self_normalised_quantile(0.1, 0.03, n_rep=5000, grid_size=1024,
                                    seed=77)
