"""Mean-field ground state: minimizer rho0 = phi0^2, multiplier mu0 and drift.

Kinetic energy is E_K = (1/2) int |grad rho|^2 / rho = 2 int |grad phi|^2, so the
Euler-Lagrange equation reads -4 phi'' + 2 W[rho] phi = mu phi with W the
effective field. The discrete kinetic term is the quadratic form of the
ghost-zero Laplacian, which makes the discrete Rayleigh quotient, energy and
multiplier identities hold to round-off.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import ConvergenceError, IncompatibleGridsError, NormalizationError
from .grid import (
    DensityField,
    ScalarField,
    UniformGrid,
    _same_grid,
    integrate,
    integrate_values,
    laplacian_values,
    trapezoid_weights,
)
from .potentials import (
    MeanFieldPotential,
    bochner_check,
    effective_field,
    interaction_moment,
    potential_energy,
    radial_profile,
)

DRIFT_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class MeanFieldGroundState:
    phi0: ScalarField
    rho0: DensityField
    mu0: float
    E: float
    E_K: float
    E_P: float
    drift: list[ScalarField] = field(repr=False)
    residual_norm: float
    iterations: int
    uniqueness_warning: bool = False

    @property
    def grid(self) -> UniformGrid:
        return self.phi0.grid

    @property
    def value(self) -> float:
        """Optimal ergodic cost; equals the minimal energy."""
        return self.E


def l2_norm_sq(values: np.ndarray, grid: UniformGrid) -> float:
    return float(integrate_values(values * values, grid))


def kinetic_energy(phi: ScalarField) -> float:
    """2 int phi (-Laplacian phi): the discrete form of (1/2) int |grad rho|^2 / rho."""
    g = phi.grid
    return 2.0 * float(integrate_values(phi.values * -laplacian_values(phi.values, g.spacing), g))


def _check_normalized(phi: ScalarField, tol: float = 1e-8):
    n = l2_norm_sq(phi.values, phi.grid)
    if abs(n - 1.0) > tol:
        raise NormalizationError(f"phi must have unit L2 norm, got {n!r}")


def energy(phi: ScalarField, potential: MeanFieldPotential) -> tuple[float, float, float]:
    """(E, E_K, E_P) of a normalized amplitude phi."""
    _check_normalized(phi)
    _same_grid(phi.grid, potential.grid, "phi and potential")
    rho = ScalarField(phi.grid, phi.values**2)
    EK = kinetic_energy(phi)
    EP = potential_energy(potential, rho)
    return EK + EP, EK, EP


def apply_linear(values: np.ndarray, W: np.ndarray, spacing) -> np.ndarray:
    """(-4 Laplacian + 2 W) applied to samples."""
    return -4.0 * laplacian_values(values, spacing) + 2.0 * W * values


def rayleigh_quotient(phi: ScalarField, W: np.ndarray) -> float:
    g = phi.grid
    num = integrate_values(phi.values * apply_linear(phi.values, W, g.spacing), g)
    return float(num) / l2_norm_sq(phi.values, g)


def _linear_ground_state_1d(W: np.ndarray, h: float) -> np.ndarray:
    n = W.size
    d = 8.0 / h**2 + 2.0 * W
    e = np.full(n - 1, -4.0 / h**2)
    _, vec = eigh_tridiagonal(d, e, select="i", select_range=(0, 0))
    return np.abs(vec[:, 0])


def _normalize(values: np.ndarray, grid: UniformGrid) -> np.ndarray:
    return values / math.sqrt(l2_norm_sq(values, grid))


def quadratic_coefficient(V0: ScalarField) -> float:
    """Curvature c2 of V0 ~ c0 + c2 x^2 near the box centre."""
    x = V0.grid.coords(0)
    centre = 0.5 * (x[0] + x[-1])
    near = np.argsort(np.abs(x - centre))[:5]
    c2, _, _ = np.polyfit(x[near] - centre, V0.values[near], 2)
    return float(c2)


def initial_density(potential: MeanFieldPotential, init: str = "gaussian") -> np.ndarray:
    grid = potential.grid
    x = grid.coords(0)
    if init == "uniform":
        rho = np.ones_like(x)
    elif init == "gaussian":
        c2 = quadratic_coefficient(potential.V0)
        width = grid.upper[0] - grid.lower[0]
        # harmonic ground state of -4 phi'' + 2 c2 x^2 phi has variance 1/sqrt(2 c2)
        var = 1.0 / math.sqrt(2.0 * c2) if c2 > 0 else (width / 8.0) ** 2
        centre = 0.5 * (x[0] + x[-1])
        rho = np.exp(-0.5 * (x - centre) ** 2 / var)
    else:
        raise ValueError(f"unknown init {init!r}; expected 'gaussian' or 'uniform'")
    return rho / integrate_values(rho, grid)


def residual_values(phi: np.ndarray, W: np.ndarray, mu: float, grid: UniformGrid) -> float:
    r = apply_linear(phi, W, grid.spacing) - mu * phi
    return math.sqrt(l2_norm_sq(r, grid) / l2_norm_sq(phi, grid))


def solve_ground_state(
    potential: MeanFieldPotential,
    grid: UniformGrid | None = None,
    tol: float = 1e-9,
    max_outer: int = 500,
    mixing: float = 0.5,
    init: str = "gaussian",
) -> MeanFieldGroundState:
    """Self-consistent iteration with density mixing around an exact 1-D linear eigensolve."""
    if grid is not None:
        _same_grid(grid, potential.grid, "requested grid and potential")
    grid = potential.grid
    if not 0 < mixing <= 1:
        raise ValueError(f"mixing must lie in (0, 1], got {mixing}")
    warn = False
    if potential.interacting and not potential.local:
        if not bochner_check(potential.v1).bochner_pass:
            warnings.warn("pair kernel fails the Bochner check; the minimizer may not be unique")
            warn = True

    h = grid.spacing[0]
    rho = initial_density(potential, init)
    phi = None
    it = 0
    change = math.inf
    for it in range(1, max_outer + 1):
        W = effective_field(potential, ScalarField(grid, rho)).values
        phi = _normalize(_linear_ground_state_1d(W, h), grid)
        new = phi * phi
        change = float(np.max(np.abs(new - rho)))
        if not potential.interacting:
            break
        rho = (1.0 - mixing) * rho + mixing * new
        if change < tol:
            break
    else:
        W = effective_field(potential, ScalarField(grid, phi * phi)).values
        mu = rayleigh_quotient(ScalarField(grid, phi), W)
        raise ConvergenceError(
            f"mean-field iteration stalled after {max_outer} steps (density change {change:.3g})",
            last_residual=residual_values(phi, W, mu, grid),
        )

    phi_f = ScalarField(grid, phi)
    rho0 = DensityField.normalized(grid, phi * phi)
    W = effective_field(potential, rho0).values
    mu0 = rayleigh_quotient(phi_f, W)
    E, EK, EP = energy(phi_f, potential)
    return MeanFieldGroundState(
        phi0=phi_f,
        rho0=rho0,
        mu0=mu0,
        E=E,
        E_K=EK,
        E_P=EP,
        drift=optimal_drift(rho0),
        residual_norm=residual_values(phi, W, mu0, grid),
        iterations=it,
        uniqueness_warning=warn,
    )


def residual(state: MeanFieldGroundState, potential: MeanFieldPotential, mu: float | None = None) -> float:
    """||-4 phi'' + 2 W[phi^2] phi - mu phi|| / ||phi||, with mu defaulting to the state's mu0."""
    W = effective_field(potential, state.rho0).values
    mu = state.mu0 if mu is None else mu
    return residual_values(state.phi0.values, W, mu, state.grid)


def chemical_potential(state: MeanFieldGroundState, potential: MeanFieldPotential) -> float:
    """mu0 through the energy identity: 2E + 2 x (interaction double integral)."""
    return 2.0 * state.E + 2.0 * interaction_moment(potential, state.rho0)


def _fill_outward(values: np.ndarray, ok: np.ndarray, axis: int) -> np.ndarray:
    """Replace entries where ~ok by the nearest ok entry along `axis` (0 if none)."""
    v = np.moveaxis(values, axis, -1)
    m = np.moveaxis(ok, axis, -1)
    n = v.shape[-1]
    idx = np.broadcast_to(np.arange(n), v.shape)
    left = np.maximum.accumulate(np.where(m, idx, -1), axis=-1)
    right = np.flip(np.minimum.accumulate(np.flip(np.where(m, idx, n), -1), axis=-1), -1)
    use_left = (left >= 0) & ((right >= n) | (idx - left <= right - idx))
    src = np.where(use_left, left, np.where(right < n, right, 0))
    out = np.take_along_axis(v, src, axis=-1)
    out = np.where(m, v, np.where((left >= 0) | (right < n), out, 0.0))
    return np.moveaxis(out, -1, axis)


def optimal_drift(rho: ScalarField, floor: float = DRIFT_FLOOR) -> list[ScalarField]:
    """grad rho / rho (as grad log rho) on rho > floor*max, extended outward by clamping."""
    vals = rho.values
    ok = vals > floor * vals.max()
    logr = np.log(np.maximum(vals, np.finfo(float).tiny))
    out = []
    for k, h in enumerate(rho.grid.spacing):
        a = np.gradient(logr, h, axis=k, edge_order=2)
        # one-sided stencils next to the cut-off would read clamped log values
        a = _fill_outward(a, ok, k)
        out.append(ScalarField(rho.grid, a))
    return out


def staggered_drift(rho: ScalarField) -> tuple[np.ndarray, np.ndarray]:
    """Edge densities and edge drifts (rho_{i+1} - rho_i) / (h rho_e) of a 1-D density.

    With rho_e = ((phi_i + phi_{i+1}) / 2)^2 the edge cost (1/2) sum h rho_e alpha_e^2
    reproduces the discrete kinetic energy.
    """
    h = rho.grid.spacing[0]
    phi = np.sqrt(np.maximum(rho.values, 0.0))
    rho_e = (0.5 * (phi[1:] + phi[:-1])) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = np.where(rho_e > 0, np.diff(rho.values) / (h * rho_e), 0.0)
    return rho_e, alpha


def ergodic_cost(
    potential: MeanFieldPotential, rho: ScalarField, alpha: ScalarField | None = None
) -> float:
    """int |alpha|^2/2 rho + int V(x, rho) rho; alpha defaults to grad rho / rho on cell edges."""
    grid = rho.grid
    if alpha is None:
        rho_e, a = staggered_drift(rho)
        h = grid.spacing[0]
        # the ghost edges (outside the box) carry phi_end^2 / h each
        ghost = 2.0 * (rho.values[0] + rho.values[-1]) / h
        control = 0.5 * h * float(np.sum(rho_e * a * a)) + ghost
    else:
        _same_grid(alpha.grid, grid, "drift and density")
        control = 0.5 * float(integrate_values(alpha.values**2 * rho.values, grid))
    return control + potential_energy(potential, rho)


# -- tail bounds ------------------------------------------------------------------


@dataclass(frozen=True)
class TailBoundReport:
    passed: bool
    upper_pass: bool
    lower_pass: bool
    a1: float
    a2: float
    a3: float
    a4: float
    R: float
    samples: int


def tail_bound_check(
    state,
    potential: MeanFieldPotential,
    R: float = 2.0,
    floor: float = 1e-12,
    margin: float = 0.1,
) -> TailBoundReport:
    """Fit Gaussian-type upper and root-potential lower envelopes for |x| >= R.

    Constants are fitted on the inner half of the tail window and the
    inequalities are then checked on every tail sample.
    """
    rho = state.rho0 if isinstance(state, MeanFieldGroundState) else state
    if rho.grid.dims != 1:
        raise IncompatibleGridsError("tail bounds are implemented for one-axis densities")
    x = rho.grid.coords(0)
    r_prof, V_prof = radial_profile(potential.V0)
    Phi_prof = np.concatenate(
        [[0.0], np.cumsum(0.5 * np.diff(r_prof) * (np.sqrt(np.maximum(V_prof[1:], 0)) + np.sqrt(np.maximum(V_prof[:-1], 0))))]
    )
    r = np.abs(x)
    tail = (r >= R) & (rho.values > floor)
    if tail.sum() < 4:
        return TailBoundReport(False, False, False, *(math.nan,) * 4, R, int(tail.sum()))
    rt, lt = r[tail], np.log(rho.values[tail])
    Phi = np.interp(rt, r_prof, Phi_prof)
    fit = rt <= R + 0.5 * (rt.max() - R)
    if fit.sum() < 2:
        fit = np.ones_like(rt, dtype=bool)
    slack = 1e-9 * max(1.0, np.max(np.abs(lt)))

    decay = -np.polyfit(rt[fit] ** 2, lt[fit], 1)[0]
    if decay > 0:
        a2 = (1.0 - margin) * decay
        a4 = float(np.max(lt[fit] + a2 * rt[fit] ** 2))
        upper = bool(np.all(lt <= -a2 * rt**2 + a4 + slack))
    else:
        a2, a4, upper = float(decay), math.nan, False

    rate = -np.polyfit(Phi[fit], lt[fit], 1)[0]
    a1 = (1.0 + margin) * max(rate, 0.0)
    a3 = float(np.min(lt[fit] + a1 * Phi[fit]))
    lower = bool(np.all(lt >= -a1 * Phi + a3 - slack))
    a = (float(a1), float(a2), float(a3), float(a4))
    return TailBoundReport(upper and lower, upper, lower, *a, float(R), int(tail.sum()))
