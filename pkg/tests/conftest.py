import pytest

_ACCEPTANCE = []


@pytest.fixture
def acceptance_report():
    """Record one pass/fail line for an acceptance criterion."""

    def record(criterion, passed, detail):
        _ACCEPTANCE.append((criterion, bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")
