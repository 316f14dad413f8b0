import random

import pytest

# filled by tests/test_acceptance.py: criterion number -> (passed, summary)
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, line = ACCEPTANCE[number]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number:2d}. {line}")


@pytest.fixture
def rng():
    return random.Random(20240611)
