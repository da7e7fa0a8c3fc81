import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# one line per acceptance criterion, collected by tests/test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record_criterion():
    def record(number: int, passed: bool, detail: str) -> None:
        line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
