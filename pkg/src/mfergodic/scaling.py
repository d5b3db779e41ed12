"""Narrowing pair kernels v_N(x) = N^beta v(N^beta x) against the contact-interaction limit."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diagnostics import l1_distance
from .errors import InvalidExponentError, InvalidPotentialError
from .grid import ScalarField, UniformGrid, integrate
from .meanfield import MeanFieldGroundState, solve_ground_state
from .nparticle import solve_linear_ground_state
from .potentials import Kernel, MeanFieldPotential, check_kernel_resolution, scaled_kernel


@dataclass(frozen=True)
class ScalingScenario:
    beta_list: tuple[float, ...]
    N_list: tuple[int, ...]
    kernel: Kernel

    def __post_init__(self):
        object.__setattr__(self, "beta_list", tuple(float(b) for b in self.beta_list))
        object.__setattr__(self, "N_list", tuple(int(n) for n in self.N_list))
        for b in self.beta_list:
            if not 0.0 < b < 1.0:
                raise InvalidExponentError(f"beta must lie strictly inside (0, 1), got {b}")
        if not np.isfinite(self.kernel.half_width):
            raise InvalidPotentialError("scaling needs a compactly supported kernel")
        if self.kernel.mass is None:
            raise InvalidPotentialError("scaling needs a kernel with known mass")

    @property
    def g_target(self) -> float:
        """Contact coupling of the limit: the kernel's mass."""
        return float(self.kernel.mass)


@dataclass(frozen=True)
class ScalingCell:
    beta: float
    N: int
    E_N: float
    E_local: float
    energy_gap: float
    marginal_L1_gap: float
    kernel_mass_error: float
    residual: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class ScalingResult:
    cells: list[ScalingCell] = field(default_factory=list)
    local: MeanFieldGroundState | None = None

    def for_beta(self, beta: float) -> list[ScalingCell]:
        return sorted((c for c in self.cells if c.beta == beta), key=lambda c: c.N)

    def trends(self) -> dict[float, dict[str, bool]]:
        out = {}
        for b in sorted({c.beta for c in self.cells}):
            cs = self.for_beta(b)
            e = [c.energy_gap for c in cs]
            l = [c.marginal_L1_gap for c in cs]
            out[b] = {
                "energy_gap_decreasing": all(x > y for x, y in zip(e, e[1:])),
                "marginal_gap_decreasing": all(x > y for x, y in zip(l, l[1:])),
            }
        return out


def local_potential(V0, g: float, grid: UniformGrid) -> MeanFieldPotential:
    return MeanFieldPotential.build(grid, V0, g=g, local=True)


def solve_local_meanfield(V0, g: float, grid: UniformGrid, tol: float = 1e-9, **kw) -> MeanFieldGroundState:
    """Minimizer with the contact term g int rho^2 in place of a pair kernel."""
    if g < 0:
        raise InvalidPotentialError(f"g must be nonnegative, got {g}")
    return solve_ground_state(local_potential(V0, g, grid), tol=tol, **kw)


def scaled_potential(V0, kernel: Kernel, beta: float, N: int, grid: UniformGrid) -> tuple[MeanFieldPotential, ScalarField]:
    """Potential with pair kernel v_N and coupling 1 (the kernel carries the mass)."""
    lag = grid.lag_grid()
    width = 2.0 * kernel.half_width * float(N) ** (-beta)
    check_kernel_resolution(width, grid.spacing[0], grid.upper[0] - grid.lower[0])
    vN = scaled_kernel(kernel, beta, N, lag)
    return MeanFieldPotential.build(grid, V0, v1=vN, g=1.0), vN


def scaling_sweep(
    scenario: ScalingScenario,
    grid: UniformGrid,
    V0,
    tol: float = 1e-9,
    tol_N: float = 1e-8,
) -> ScalingResult:
    """Solve every (beta, N) cell and compare with the contact-interaction minimizer."""
    # fail on resolution before any expensive solve; the narrowest kernel sets the count
    if scenario.beta_list and scenario.N_list:
        narrowest = min(
            2.0 * scenario.kernel.half_width * float(N) ** (-beta)
            for beta in scenario.beta_list
            for N in scenario.N_list
        )
        check_kernel_resolution(narrowest, grid.spacing[0], grid.upper[0] - grid.lower[0])
    local = solve_local_meanfield(V0, scenario.g_target, grid, tol=tol)
    result = ScalingResult(local=local)
    for beta in scenario.beta_list:
        for N in scenario.N_list:
            pot, vN = scaled_potential(V0, scenario.kernel, beta, N, grid)
            st = solve_linear_ground_state(pot, N, tol=tol_N, warm_start=local)
            result.cells.append(
                ScalingCell(
                    beta=beta,
                    N=N,
                    E_N=st.E_N,
                    E_local=local.E,
                    energy_gap=abs(local.E - st.E_N),
                    marginal_L1_gap=l1_distance(st.marginal1, local.rho0),
                    kernel_mass_error=abs(integrate(vN) - scenario.g_target),
                    residual=st.residual_norm,
                )
            )
    return result
