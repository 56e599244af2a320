import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def acceptance_report():
    """Record one pass/fail line per acceptance criterion."""
    def record(criterion: str, passed: bool, detail: str = ""):
        _ACCEPTANCE.append((criterion, passed, detail))
        print(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")
