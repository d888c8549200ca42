import numpy as np
import pytest

from lvnonlocal.domain import assemble_dispersal, build_grid, build_kernel

ACCEPTANCE_LINES = []


def make_operator(regime="neumann", n=32, L=2.0, r=0.5, dimension=1, profile="smooth_bump"):
    ext = [L] * dimension
    grid = build_grid(dimension, ext, [n] * dimension, regime)
    return assemble_dispersal(grid, build_kernel(grid, r, profile))


@pytest.fixture(scope="session")
def neumann32():
    return make_operator("neumann", 32)


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
