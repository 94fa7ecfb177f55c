import pytest

ACCEPTANCE_LINES = {}


@pytest.fixture
def report():
    """Record the one-line verdict of an acceptance criterion."""

    def _record(number, passed, summary):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {summary}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
