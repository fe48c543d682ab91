import numpy as np
import pytest
from hypothesis import settings

from quadsemigroup import ensembles

settings.register_profile("default", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("default")


@pytest.fixture
def ho():
    return ensembles.harmonic_oscillator()


@pytest.fixture
def kramers():
    return ensembles.kramers_symbol()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_line():
    """Record the one-line verdict of an acceptance criterion."""

    def record(number, ok, text):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {text}"
        _ACCEPTANCE_LINES.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
