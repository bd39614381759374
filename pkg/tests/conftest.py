import pytest

_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line for an acceptance criterion.

    The line is printed immediately and repeated in the terminal summary, so
    the full verdict list appears even when output capture is on.
    """

    def record(number, passed, detail, seconds):
        line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail} [{seconds:.1f} s]"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
