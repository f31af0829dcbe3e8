import numpy as np
import pytest

_ACCEPTANCE = {}


def record_criterion(number: int, passed: bool, detail: str):
    """Record an acceptance verdict and echo it as one line."""
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    _ACCEPTANCE[number] = line
    print(line)
    return passed


@pytest.fixture
def criterion():
    return record_criterion


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[key])
