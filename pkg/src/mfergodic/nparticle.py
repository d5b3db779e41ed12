"""Symmetric ground state of the linear N-particle problem (N <= 4, one axis per particle).

Solves -4 Laplacian phi + 2 V_N phi = mu_N phi on the N-fold product grid, matrix
free. Per-particle energies satisfy mu_N = 2 N E_N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from .eigen import lowest_eigenpair
from .errors import ConsistencyError, IncompatibleGridsError, ResolutionError, UnsupportedDimensionError
from .grid import DensityField, ScalarField, UniformGrid, _same_grid, integrate_values, marginalize
from .meanfield import (
    MeanFieldGroundState,
    _check_normalized,
    apply_linear,
    kinetic_energy,
    l2_norm_sq,
    optimal_drift,
    solve_ground_state,
)
from .potentials import MeanFieldPotential, assemble_VN

MAX_N = 4
NODE_BUDGET = 2_100_000


@dataclass(frozen=True, eq=False)
class NParticleGroundState:
    N: int
    phiN: ScalarField
    rhoN: DensityField
    muN: float
    E_N: float
    E_KN: float
    E_PN: float
    marginal1: DensityField
    residual_norm: float
    iterations: int
    min_raw: float = 0.0
    VN: ScalarField | None = field(default=None, repr=False)

    @property
    def grid(self) -> UniformGrid:
        return self.phiN.grid

    @property
    def value(self) -> float:
        return self.E_N

    @property
    def mu_per_particle(self) -> float:
        """Multiplier in the per-particle convention mu = 2 E_N."""
        return 2.0 * self.E_N


def symmetrize(values: np.ndarray) -> np.ndarray:
    """Average over all permutations of the axes."""
    perms = list(permutations(range(values.ndim)))
    out = np.zeros_like(values)
    for p in perms:
        out += np.transpose(values, p)
    return out / len(perms)


def product_amplitude(phi0: np.ndarray, N: int) -> np.ndarray:
    out = phi0
    for _ in range(N - 1):
        out = np.multiply.outer(out, phi0)
    return out


def _check_N(N: int):
    if not 2 <= N <= MAX_N:
        raise UnsupportedDimensionError(f"N must lie in 2..{MAX_N}, got {N}")


def check_budget(grid_N: UniformGrid, budget: int = NODE_BUDGET):
    if grid_N.size > budget:
        per_axis = int(math.floor(budget ** (1.0 / grid_N.dims)))
        raise ResolutionError(
            f"{grid_N.size} nodes exceed the budget of {budget}; use at most {per_axis} points per axis",
            suggested_points=per_axis,
        )


def energy_N(phiN: ScalarField, potential: MeanFieldPotential, N: int | None = None, VN=None):
    """Per-particle (E_N, E_KN, E_PN) of a normalized N-particle amplitude."""
    N = phiN.grid.dims if N is None else N
    if phiN.grid.dims != N:
        raise IncompatibleGridsError(f"amplitude has {phiN.grid.dims} axes, expected {N}")
    _check_normalized(phiN)
    VN = assemble_VN(potential, N, phiN.grid) if VN is None else VN
    EK = kinetic_energy(phiN) / N
    EP = float(integrate_values(VN.values * phiN.values**2, phiN.grid)) / N
    return EK + EP, EK, EP


def solve_linear_ground_state(
    potential: MeanFieldPotential,
    N: int,
    grid: UniformGrid | None = None,
    tol: float = 1e-8,
    max_iter: int = 20000,
    warm_start: MeanFieldGroundState | np.ndarray | None = None,
    budget: int = NODE_BUDGET,
) -> NParticleGroundState:
    """Lowest symmetric eigenpair of -4 Laplacian + 2 V_N.

    The iteration starts from the product of mean-field amplitudes on the same
    axis grid, so its energy never exceeds the mean-field energy.
    """
    _check_N(N)
    grid_N = potential.grid.power(N) if grid is None else grid
    if grid_N.dims != N:
        raise IncompatibleGridsError(f"grid has {grid_N.dims} axes, expected {N}")
    for k in range(N):
        _same_grid(grid_N.axis_grid(k), potential.grid, f"axis {k} and the one-particle grid")
    check_budget(grid_N, budget)

    if warm_start is None:
        warm_start = solve_ground_state(potential)
    phi0 = warm_start.phi0.values if isinstance(warm_start, MeanFieldGroundState) else np.asarray(warm_start)

    VN = assemble_VN(potential, N, grid_N)
    V = VN.values
    h = grid_N.spacing

    res = lowest_eigenpair(
        lambda v: apply_linear(v, V, h),
        product_amplitude(phi0, N),
        tol=tol,
        max_iter=max_iter,
        project=symmetrize,
    )
    vals = res.vector
    min_raw = float(vals.min() / vals.max())
    if min_raw < -1e-8:
        raise ConsistencyError(f"ground state changes sign (min/max = {min_raw:.3g})")
    vals = np.clip(vals, 0.0, None)
    vals = vals / math.sqrt(l2_norm_sq(vals, grid_N))
    phiN = ScalarField(grid_N, vals)
    rhoN = DensityField.normalized(grid_N, vals * vals)

    E, EK, EP = energy_N(phiN, potential, N, VN)
    Hphi = apply_linear(vals, V, h)
    mu = float(integrate_values(vals * Hphi, grid_N))
    r = math.sqrt(l2_norm_sq(Hphi - mu * vals, grid_N))
    return NParticleGroundState(
        N=N,
        phiN=phiN,
        rhoN=rhoN,
        muN=mu,
        E_N=E,
        E_KN=EK,
        E_PN=EP,
        marginal1=marginalize(rhoN, [0]),
        residual_norm=r,
        iterations=res.iterations,
        min_raw=min_raw,
        VN=VN,
    )


def residual_N(state: NParticleGroundState) -> float:
    v = state.phiN.values
    r = apply_linear(v, state.VN.values, state.grid.spacing) - state.muN * v
    return math.sqrt(l2_norm_sq(r, state.grid) / l2_norm_sq(v, state.grid))


def marginal_k(state: NParticleGroundState, k: int, axes=None) -> DensityField:
    """k-particle marginal (first k axes unless `axes` is given)."""
    if not 1 <= k < state.N:
        raise UnsupportedDimensionError(f"k must satisfy 1 <= k < N={state.N}, got {k}")
    axes = list(range(k)) if axes is None else list(axes)
    if len(axes) != k:
        raise UnsupportedDimensionError(f"expected {k} axes, got {axes}")
    return marginalize(state.rhoN, axes)


def optimal_drift_N(state: NParticleGroundState) -> list[ScalarField]:
    """Per-particle drifts grad_i rho_N / rho_N."""
    return optimal_drift(state.rhoN)
