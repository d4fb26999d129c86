import pytest

_VERDICTS = {}


@pytest.fixture
def verdict():
    """Record and print one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(number, checks):
        ok = all(passed for _, passed, _ in checks)
        detail = "; ".join(f"{label}={value} ({'ok' if passed else 'FAIL'})" for label, passed, value in checks)
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'} | {detail}"
        _VERDICTS[number] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_VERDICTS):
            terminalreporter.write_line(_VERDICTS[number])
