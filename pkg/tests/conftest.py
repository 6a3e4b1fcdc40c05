import numpy as np
import pytest

from wavefuzz.mfcc import MfccConfig


@pytest.fixture
def cfg():
    return MfccConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES = {}


@pytest.fixture
def criterion():
    """Record the one-line verdict of an acceptance criterion."""
    def record(key, ok, detail):
        ACCEPTANCE_LINES[key] = f"{'PASS' if ok else 'FAIL'}  criterion {key}: {detail}"
        print(ACCEPTANCE_LINES[key])
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
