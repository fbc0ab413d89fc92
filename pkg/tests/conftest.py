import numpy as np
import pytest

from asw import corpus


@pytest.fixture(scope="session")
def photos64():
    return [img for _, img in corpus.desk_corpus(6, 64)]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
