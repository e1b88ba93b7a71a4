from __future__ import annotations

import pytest

_VERDICTS: list[str] = []


@pytest.fixture
def acceptance_record():
    """Collects one verdict line per acceptance criterion for the terminal summary."""
    return _VERDICTS.append


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS, key=lambda s: int(s.split("] ")[1].split()[0])):
            terminalreporter.write_line(line)
