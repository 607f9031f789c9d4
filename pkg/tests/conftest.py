import pytest

_LINES = {}


@pytest.fixture
def report():
    """Record one acceptance line: report(number, passed, detail)."""

    def add(num, passed, detail=""):
        _LINES[num] = f"criterion {num:2d}: {'PASS' if passed else 'FAIL'}  {detail}".rstrip()
        print(_LINES[num])

    return add


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_LINES):
        terminalreporter.write_line(_LINES[num])
