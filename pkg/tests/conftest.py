import pytest

_RESULTS: list[tuple[int, bool, str]] = []


@pytest.fixture
def criterion():
    """Record one acceptance line: call with (number, ok, detail) before asserting."""
    def record(number: int, ok: bool, detail: str) -> bool:
        _RESULTS.append((number, ok, detail))
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(_RESULTS):
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
