import pytest

from tilenet.rules import chair, penrose
from tilenet.spectral import spectral_report


@pytest.fixture(scope="session")
def pen():
    return penrose()


@pytest.fixture(scope="session")
def chr_():
    return chair()


@pytest.fixture(scope="session")
def pen_report(pen):
    return spectral_report(pen)


@pytest.fixture(scope="session")
def chair_report(chr_):
    return spectral_report(chr_)


ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
