import numpy as np
import pytest

from logschrodinger import Field, build_grid
from logschrodinger import potential as pot
from logschrodinger.heat_kernel import Eigenexpansion
from logschrodinger.operator import assemble, eigendecompose

# filled by tests/test_acceptance.py, printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def bump(center, width=1.0):
    center = np.atleast_1d(np.asarray(center, dtype=float))
    return lambda p: np.exp(-np.sum((p - center) ** 2, axis=1) / width**2)


@pytest.fixture(scope="session")
def harmonic_1d():
    """Second-order FD harmonic oscillator, n = 1024 on [-12, 12]."""
    grid = build_grid(1, [(-12.0, 12.0)], [1024])
    sd = eigendecompose(assemble(grid, pot.harmonic(1)))
    return grid, sd


@pytest.fixture(scope="session")
def harmonic_1d_ev(harmonic_1d):
    return Eigenexpansion(harmonic_1d[1])


@pytest.fixture(scope="session")
def harmonic_1d_order4():
    """Fourth-order FD harmonic oscillator on the same grid."""
    grid = build_grid(1, [(-12.0, 12.0)], [1024])
    return grid, eigendecompose(assemble(grid, pot.harmonic(1), order=4))


@pytest.fixture(scope="session")
def small_harmonic_1d():
    grid = build_grid(1, [(-10.0, 10.0)], [256])
    return grid, eigendecompose(assemble(grid, pot.harmonic(1)))


@pytest.fixture
def bump_field(harmonic_1d):
    grid, _ = harmonic_1d
    return Field.from_function(grid, bump(0.3))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
