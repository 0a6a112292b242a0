import logging

import pytest

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = {}


def record(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"


@pytest.fixture(autouse=True)
def _quiet_character_lint(caplog):
    # the stock characters are deliberately overdamped; keep their lint warning out of test logs
    logging.getLogger("planarmimic.charmodel").setLevel(logging.ERROR)
    yield
    logging.getLogger("planarmimic.charmodel").setLevel(logging.NOTSET)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
