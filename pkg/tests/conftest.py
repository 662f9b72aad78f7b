import numpy as np
import pytest

from flowfields.image import srgb_to_cielab
from flowfields.synthetic import textured_noise


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def lab_noise(rng):
    """A 48x64 unique-texture CIELab image."""
    return srgb_to_cielab(textured_noise(48, 64, rng))


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line for the acceptance summary.

    Usage: ``criterion(number, name, passed, detail)``; it also asserts.
    """

    def record(number, name, passed, detail=""):
        line = f"[{'PASS' if passed else 'FAIL'}] {number:>2}. {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(".")[0].split()[-1])):
            terminalreporter.write_line(line)
