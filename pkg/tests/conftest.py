import math

import numpy as np
import pytest

from mrcsim.dynamics import HamiltonianTerms
from mrcsim.ground_state import solve_ground_state
from mrcsim.interactions import Nonlinearity
from mrcsim.pulses import pulse_from_dimensionless
from mrcsim.units import CondensateParams, Grid, PhysicalConstants, derive_scales, make_grid

OMEGA0 = 2 * math.pi * 300e3


@pytest.fixture(scope="session")
def constants():
    return PhysicalConstants()


@pytest.fixture(scope="session")
def params():
    return CondensateParams()


@pytest.fixture(scope="session")
def nonlinearity(constants, params):
    return Nonlinearity(constants, params)


@pytest.fixture(scope="session")
def grid(constants, params, nonlinearity):
    return make_grid(derive_scales(constants, params, nonlinearity=nonlinearity), 4, 1.4)


@pytest.fixture(scope="session")
def terms(grid, constants, params, nonlinearity):
    return HamiltonianTerms(grid, constants, params, nonlinearity)


@pytest.fixture(scope="session")
def ground_solution(grid, constants, params, nonlinearity):
    return solve_ground_state(params, constants, grid, 1e-8, nonlinearity=nonlinearity,
                              full_output=True)


@pytest.fixture(scope="session")
def ground(ground_solution):
    return ground_solution[0]


@pytest.fixture(scope="session")
def scales(constants, params, ground, nonlinearity):
    return derive_scales(constants, params, ground, nonlinearity)


@pytest.fixture(scope="session")
def reference_pulse():
    return pulse_from_dimensionless(OMEGA0, 3.2, 5.0, 0.003, delta1=3.2 * OMEGA0, gradient=237.5)


@pytest.fixture(scope="session")
def small_grid():
    return Grid.symmetric(256, 40e-6)


@pytest.fixture
def gaussian(small_grid):
    z = small_grid.z
    psi = np.exp(-(z / 8e-6) ** 2 / 2).astype(complex)
    return psi / math.sqrt(np.sum(np.abs(psi) ** 2) * small_grid.dz)


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record one pass/fail line for an acceptance criterion."""
    def record(number, name, passed, detail):
        line = f"C{number:<2d} {'PASS' if passed else 'FAIL'}  {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s[1:3])):
            terminalreporter.write_line(line)
