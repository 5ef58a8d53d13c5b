import pytest

_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record an acceptance outcome: ``criterion(number, passed, detail)``; ``passed=None`` means skipped."""

    def record(number, passed, detail):
        _CRITERIA[number] = (passed, detail)
        print(_line(number, passed, detail))
        return passed

    return record


def _line(number, passed, detail):
    status = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
    return f"criterion {number:2d}: {status}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        terminalreporter.write_line(_line(number, *_CRITERIA[number]))
