import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion; returns the line."""
    def record(number: int, passed: bool, detail: str) -> str:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        _CRITERIA[number] = line
        print(line)
        return line
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[k])
