import math
import time
import warnings
from functools import cached_property

import numpy as np
import pytest

from mfergodic.grid import UniformGrid
from mfergodic.meanfield import solve_ground_state
from mfergodic.nparticle import solve_linear_ground_state
from mfergodic.potentials import MeanFieldPotential, gaussian_kernel, polynomial

SQRT2 = math.sqrt(2.0)
ACCEPTANCE_LINES: list[str] = []
HARMONIC = polynomial([0.0, 1.0])


def gaussian_density(x, mean=0.0, var=1.0):
    return np.exp(-0.5 * (x - mean) ** 2 / var) / math.sqrt(2 * math.pi * var)


class Family:
    """Lazily solved mean-field and N-particle states sharing one axis grid."""

    def __init__(self, potential: MeanFieldPotential):
        self.potential = potential
        self._states = {}
        self.seconds = {}

    @cached_property
    def mf(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return solve_ground_state(self.potential)

    def state(self, N: int):
        if N not in self._states:
            mf = self.mf
            t0 = time.perf_counter()
            self._states[N] = solve_linear_ground_state(self.potential, N, warm_start=mf)
            self.seconds[N] = time.perf_counter() - t0
        return self._states[N]


@pytest.fixture(scope="session")
def fine_grid():
    return UniformGrid.line(-8.0, 8.0, 1025)


@pytest.fixture(scope="session")
def harmonic_fine(fine_grid):
    pot = MeanFieldPotential.build(fine_grid, HARMONIC)
    return pot, solve_ground_state(pot)


@pytest.fixture(scope="session")
def axis():
    """Shared one-particle axis for N <= 4 product grids (33^4 nodes at N = 4)."""
    return UniformGrid.line(-6.0, 6.0, 33)


@pytest.fixture(scope="session")
def interacting(axis):
    return Family(MeanFieldPotential.build(axis, HARMONIC, v1=gaussian_kernel(1.0), g=0.5))


@pytest.fixture(scope="session")
def free(axis):
    return Family(MeanFieldPotential.build(axis, HARMONIC, v1=gaussian_kernel(1.0), g=0.0))


@pytest.fixture(scope="session")
def scaling_result(axis):
    """beta in {0.2, 0.5}, N in {2, 3, 4}, unit-mass bump of width 5 on the shared axis."""
    from mfergodic.potentials import bump_kernel
    from mfergodic.scaling import ScalingScenario, scaling_sweep

    scen = ScalingScenario((0.2, 0.5), (2, 3, 4), bump_kernel(5.0))
    return scaling_sweep(scen, axis, HARMONIC)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
