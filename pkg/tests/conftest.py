import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# Acceptance checks append (label, passed, detail) here; printed at the end.
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in sorted(ACCEPTANCE_LINES, key=lambda t: int(t[0].split()[1])):
        terminalreporter.write_line(f"{label}: {'PASS' if passed else 'FAIL'}  {detail}")
