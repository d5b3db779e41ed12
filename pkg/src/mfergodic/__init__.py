"""Numerical laboratory for mean-field ergodic control and its N-particle approximation."""

__version__ = "0.1.0"

from .grid import DensityField, ScalarField, UniformGrid  # noqa: E402
from .meanfield import MeanFieldGroundState, solve_ground_state  # noqa: E402
from .nparticle import NParticleGroundState, solve_linear_ground_state  # noqa: E402
from .potentials import MeanFieldPotential  # noqa: E402

__all__ = [
    "DensityField",
    "MeanFieldGroundState",
    "MeanFieldPotential",
    "NParticleGroundState",
    "ScalarField",
    "UniformGrid",
    "solve_ground_state",
    "solve_linear_ground_state",
]
