import pytest

_RESULTS = {}


@pytest.fixture
def criterion():
    """Record one acceptance criterion: criterion(number, passed, detail)."""

    def record(number, passed, detail=""):
        _RESULTS[number] = (bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        passed, detail = _RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
