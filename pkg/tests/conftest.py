from __future__ import annotations

import pytest

_CRITERIA = pytest.StashKey[dict]()


def pytest_configure(config: pytest.Config) -> None:
    config.stash[_CRITERIA] = {}


@pytest.fixture
def criterion(request: pytest.FixtureRequest):
    """Record one pass/fail line for an acceptance criterion; printed in the terminal summary."""
    lines = request.config.stash[_CRITERIA]

    def record(number: int, title: str, ok: bool, detail: str) -> None:
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        lines[number] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config: pytest.Config) -> None:
    lines = config.stash[_CRITERIA]
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(lines):
        terminalreporter.write_line(lines[number])
