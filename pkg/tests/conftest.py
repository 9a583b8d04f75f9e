import os

import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_LINES = []


@pytest.fixture
def criterion_line():
    """Record one 'criterion N: PASS/FAIL ...' line; all are echoed at the end of the run."""
    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _LINES.append((number, line))
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance")
        for _, line in sorted(_LINES, key=lambda t: t[0]):
            terminalreporter.write_line(line)
