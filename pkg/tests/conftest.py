import os

import pytest

# Backend and debug toggles come from the environment; keep test runs explicit.
for _name in ("NBRSMR_BACKEND", "NBRSMR_DEBUG"):
    os.environ.pop(_name, None)


@pytest.fixture
def debug_config():
    from nbrsmr import SMRConfig
    return SMRConfig(debug=True, threshold=8, max_reservations=3)


_CRITERIA: dict[int, str] = {}


class CriterionReporter:
    """Prints one PASS/FAIL line per acceptance criterion, live and in the summary."""

    def __init__(self, capsys):
        self.capsys = capsys

    def report(self, number: int, title: str, passed: bool, detail: str) -> bool:
        line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
        _CRITERIA[number] = line
        with self.capsys.disabled():
            print("\n" + line, flush=True)
        return passed


@pytest.fixture
def criterion(capsys):
    return CriterionReporter(capsys)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[number])
