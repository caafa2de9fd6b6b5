import numpy as np
import pytest

from ifpp.diffusion import InitialDistribution, brownian

# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE: dict = {}


def record(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])


@pytest.fixture
def bm():
    return brownian()


@pytest.fixture
def from_one():
    return InitialDistribution.point_mass(1.0)


@pytest.fixture
def from_zero():
    return InitialDistribution.point_mass(0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(7)
