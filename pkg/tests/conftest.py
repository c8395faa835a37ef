import pytest

from wbsparse.wavelets import build_basis, tabulate


@pytest.fixture(scope="session")
def d4():
    return build_basis(4)


@pytest.fixture(scope="session")
def d4_table(d4):
    return tabulate(d4, 12)


# One line per acceptance criterion, filled in by tests/test_acceptance.py.
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
