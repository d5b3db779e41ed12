"""Affine mean-field potentials V(x, mu) = V0(x) + <v0, mu> + g (v1 * mu)(x).

Everything here works with sampled fields on a one-axis grid. The pair kernel
v1 is stored on the grid's lag grid (all differences x_i - x_j), which makes
the convolution and the pairwise N-particle sums use the same numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    IncompatibleGridsError,
    InvalidExponentError,
    InvalidGridError,
    InvalidPotentialError,
    InvalidProfileError,
    ResolutionError,
)
from .grid import (
    DensityField,
    ScalarField,
    UniformGrid,
    _same_grid,
    convolve,
    integrate,
    interpolate_many,
    trapezoid_weights,
)

# integral of exp(-1/(1-t^2)) over (-1, 1)
_BUMP_INTEGRAL = 0.4439938161680793
MIN_KERNEL_NODES = 6


@dataclass(frozen=True)
class Kernel:
    """Even real function of one variable with optional compact support."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    half_width: float = math.inf
    mass: float | None = None

    def __call__(self, x):
        return self.fn(np.asarray(x, dtype=float))

    def sample(self, grid: UniformGrid) -> ScalarField:
        return ScalarField(grid, self(grid.coords(0)))

    def scaled(self, factor: float) -> "Kernel":
        """x -> factor * v(factor * x): same mass, support shrunk by `factor`."""
        base = self.fn
        return Kernel(
            f"{self.name}@{factor:g}",
            lambda x: factor * base(factor * x),
            self.half_width / factor,
            self.mass,
        )


def gaussian_kernel(sigma: float, normalized: bool = False) -> Kernel:
    """exp(-x^2 / 2 sigma^2); unit peak by default, unit mass if `normalized`."""
    if not sigma > 0:
        raise InvalidPotentialError("gaussian kernel needs sigma > 0")
    scale = 1.0 / (math.sqrt(2 * math.pi) * sigma) if normalized else 1.0
    mass = scale * math.sqrt(2 * math.pi) * sigma
    return Kernel(
        f"gaussian({sigma:g})", lambda x: scale * np.exp(-0.5 * (x / sigma) ** 2), math.inf, mass
    )


def cosine_kernel(k: float) -> Kernel:
    return Kernel(f"cosine({k:g})", lambda x: np.cos(k * x))


def bump_kernel(width: float, mass: float = 1.0) -> Kernel:
    """Smooth compactly supported bump on [-width/2, width/2] with the given mass."""
    if not width > 0:
        raise InvalidPotentialError("bump kernel needs width > 0")
    half = 0.5 * width
    amp = mass / (half * _BUMP_INTEGRAL)

    def fn(x):
        t = x / half
        out = np.zeros_like(t)
        inside = np.abs(t) < 1.0
        out[inside] = amp * np.exp(-1.0 / (1.0 - t[inside] ** 2))
        return out

    return Kernel(f"bump({width:g})", fn, half, mass)


def table_kernel(xs, values, name: str = "table") -> Kernel:
    """Piecewise-linear kernel through (xs, values), zero outside the table."""
    xs = np.asarray(xs, dtype=float)
    vs = np.asarray(values, dtype=float)
    order = np.argsort(xs)
    xs, vs = xs[order], vs[order]
    if xs.size < 2:
        raise InvalidPotentialError("table kernel needs at least two samples")
    half = float(max(abs(xs[0]), abs(xs[-1])))
    mass = float(np.trapezoid(vs, xs))
    return Kernel(name, lambda x: np.interp(x, xs, vs, left=0.0, right=0.0), half, mass)


def load_table_kernel(path) -> Kernel:
    with open(path) as fh:
        first = fh.readline()
    # an optional "x,value" header line
    header = any(c.isalpha() and c not in "eE" for c in first)
    data = np.loadtxt(path, delimiter=",", ndmin=2, comments="#", skiprows=int(header))
    if data.shape[1] != 2:
        raise InvalidPotentialError(f"{path}: expected two columns (x, value)")
    return table_kernel(data[:, 0], data[:, 1], name=f"table({path})")


def delta_kernel(grid: UniformGrid) -> ScalarField:
    """Discrete delta on the lag grid of `grid`: 1/h at the centre node."""
    lag = grid.lag_grid()
    vals = np.zeros(lag.points[0])
    vals[lag.points[0] // 2] = 1.0 / grid.spacing[0]
    return ScalarField(lag, vals)


def polynomial(coeffs) -> Callable[[np.ndarray], np.ndarray]:
    """Even polynomial c0 + c2 x^2 + c4 x^4 + ... from [c0, c2, c4, ...]."""
    cs = [float(c) for c in coeffs]

    def fn(x):
        x2 = np.asarray(x, dtype=float) ** 2
        out = np.zeros_like(x2)
        for c in reversed(cs):
            out = out * x2 + c
        return out

    return fn


# -- the potential family -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MeanFieldPotential:
    """Trap V0, one-body term v0, pair kernel v1 (on the lag grid) and coupling g.

    With ``local=True`` the pair interaction is the contact term g*rho and
    ``v1`` is ignored.
    """

    grid: UniformGrid
    V0: ScalarField
    v0: ScalarField
    v1: ScalarField | None
    g: float = 0.0
    local: bool = False

    def __post_init__(self):
        if self.grid.dims != 1:
            raise InvalidGridError("mean-field potentials live on a one-axis grid")
        _same_grid(self.V0.grid, self.grid, "V0 and grid")
        _same_grid(self.v0.grid, self.grid, "v0 and grid")
        if self.g < 0:
            raise InvalidPotentialError(f"coupling g must be nonnegative, got {self.g}")
        for name, f in (("V0", self.V0), ("v0", self.v0)):
            if not np.all(np.isfinite(f.values)):
                raise InvalidPotentialError(f"{name} has non-finite samples")
        V = self.V0.values
        if V.max() > max(V[0], V[-1]) + 1e-12 * max(1.0, abs(V.max())):
            raise InvalidPotentialError("V0 must attain its maximum on the box boundary")
        if self.v1 is not None and not self.local:
            _same_grid(self.v1.grid, self.grid.lag_grid(), "v1 and the lag grid")
            k = self.v1.values
            if not np.all(np.isfinite(k)):
                raise InvalidPotentialError("v1 has non-finite samples")
            if np.max(np.abs(k - k[::-1])) > 1e-12 * max(1.0, np.max(np.abs(k))):
                raise InvalidPotentialError("v1 must be even")

    @classmethod
    def build(
        cls,
        grid: UniformGrid,
        V0,
        v0=None,
        v1=None,
        g: float = 0.0,
        local: bool = False,
    ) -> "MeanFieldPotential":
        """Sample callables/kernels onto `grid` (v1 onto its lag grid)."""
        x = grid.coords(0)
        V0f = V0 if isinstance(V0, ScalarField) else ScalarField(grid, V0(x))
        if v0 is None:
            v0f = ScalarField(grid, np.zeros_like(x))
        else:
            v0f = v0 if isinstance(v0, ScalarField) else ScalarField(grid, v0(x))
        v1f = None
        if v1 is not None and not local:
            lag = grid.lag_grid()
            v1f = v1 if isinstance(v1, ScalarField) else ScalarField(lag, v1(lag.coords(0)))
        return cls(grid, V0f, v0f, v1f, float(g), local)

    def with_coupling(self, g: float) -> "MeanFieldPotential":
        return MeanFieldPotential(self.grid, self.V0, self.v0, self.v1, float(g), self.local)

    @property
    def interacting(self) -> bool:
        return self.g != 0.0 and (self.local or self.v1 is not None)


def _check_density(potential: MeanFieldPotential, mu: ScalarField):
    if mu.grid.dims != 1:
        raise IncompatibleGridsError("mu must be a one-particle density")
    _same_grid(mu.grid, potential.grid, "density and potential")


def pair_field(potential: MeanFieldPotential, rho: np.ndarray) -> np.ndarray:
    """g * sum_j w_j v1(x - x_j) rho_j (trapezoid in y), or g*rho when local."""
    if not potential.interacting:
        return np.zeros_like(rho)
    if potential.local:
        return potential.g * rho
    h = potential.grid.spacing[0]
    # convolve() uses the Riemann weight h; fold the trapezoid end weights in
    # so the pair energy is the same double sum as the N-particle formula.
    weighted = rho * (trapezoid_weights(potential.grid, 0) / h)
    return potential.g * convolve(ScalarField(potential.grid, weighted), potential.v1).values


def evaluate(potential: MeanFieldPotential, mu: ScalarField) -> ScalarField:
    """V(x, mu) = V0(x) + <v0, mu> + g (v1 * mu)(x)."""
    _check_density(potential, mu)
    c = integrate(potential.v0, mu)
    return ScalarField(
        potential.grid, potential.V0.values + c + pair_field(potential, mu.values)
    )


def effective_field(potential: MeanFieldPotential, mu: ScalarField) -> ScalarField:
    """Self-consistent field V(x, mu) + v0(x) + g (v1 * mu)(x) of the Euler-Lagrange equation."""
    _check_density(potential, mu)
    c = integrate(potential.v0, mu)
    return ScalarField(
        potential.grid,
        potential.V0.values + c + potential.v0.values + 2.0 * pair_field(potential, mu.values),
    )


def potential_energy(potential: MeanFieldPotential, rho: ScalarField) -> float:
    """int V(x, rho) rho(x) dx."""
    return integrate(evaluate(potential, rho), rho)


def interaction_moment(potential: MeanFieldPotential, rho: ScalarField) -> float:
    """Double integral of the measure derivative against rho x rho: <v0,rho> + g<rho, v1*rho>."""
    _check_density(potential, rho)
    return integrate(potential.v0, rho) + integrate(
        ScalarField(potential.grid, pair_field(potential, rho.values)), rho
    )


def _pair_matrix(potential: MeanFieldPotential) -> np.ndarray:
    m = potential.grid.points[0]
    idx = np.arange(m)
    return potential.v1.values[idx[:, None] - idx[None, :] + (m - 1)]


def assemble_VN(potential: MeanFieldPotential, N: int, grid_N: UniformGrid) -> ScalarField:
    """sum_i V(x_i, empirical measure of the other N-1 particles) on the N-particle grid."""
    if N < 2:
        raise InvalidPotentialError(f"N-particle potential needs N >= 2, got {N}")
    if grid_N.dims != N:
        raise IncompatibleGridsError(f"grid has {grid_N.dims} axes, expected {N}")
    for k in range(N):
        _same_grid(grid_N.axis_grid(k), potential.grid, f"axis {k} and the one-particle grid")
    if potential.local and potential.g != 0:
        raise InvalidPotentialError("contact interactions have no pointwise N-particle form")
    m = potential.grid.points[0]
    one = potential.V0.values + potential.v0.values
    out = np.zeros(grid_N.shape)
    for i in range(N):
        shape = [1] * N
        shape[i] = m
        out = out + one.reshape(shape)
    if potential.interacting:
        K = (potential.g / (N - 1)) * _pair_matrix(potential)
        for i in range(N):
            for k in range(N):
                if i == k:
                    continue
                shape = [1] * N
                shape[i] = m
                shape[k] = m
                block = K if i < k else K.T
                out = out + block.reshape(shape)
    return ScalarField(grid_N, out)


def VN_at(potential: MeanFieldPotential, N: int, point) -> float:
    """Direct evaluation of V_N at one node-aligned configuration (used as a cross-check)."""
    x = np.asarray(point, dtype=float)
    g1 = ScalarField(potential.grid, potential.V0.values + potential.v0.values)
    total = float(np.sum(interpolate_many(g1, x[:, None])))
    if potential.interacting:
        lag = ScalarField(potential.v1.grid, potential.v1.values)
        diffs = np.array([x[i] - x[k] for i in range(N) for k in range(N) if i != k])
        total += potential.g / (N - 1) * float(np.sum(interpolate_many(lag, diffs[:, None])))
    return total


# -- hypothesis certificates ----------------------------------------------------------


@dataclass(frozen=True)
class HypothesisReport:
    bochner_pass: bool | None = None
    bochner_min_spectrum: float | None = None
    bochner_max_spectrum: float | None = None
    qv_pass: bool | None = None
    epsilon: float | None = None
    e1: float | None = None
    e2: float | None = None
    e3: float | None = None

    def merge(self, other: "HypothesisReport") -> "HypothesisReport":
        vals = {k: v for k, v in other.__dict__.items() if v is not None}
        return HypothesisReport(**{**self.__dict__, **vals})


def bochner_check(v1: ScalarField, rel_tol: float = 1e-10) -> HypothesisReport:
    """Positive-definiteness test through the sign of the sampled kernel's spectrum."""
    grid = v1.grid
    if grid.dims != 1:
        raise InvalidGridError("bochner_check expects a one-axis kernel")
    if not grid.is_symmetric():
        raise InvalidGridError("bochner_check needs a grid symmetric about the origin")
    n = grid.points[0]
    h = grid.spacing[0]
    x0 = grid.coords(0)[0]
    omega = 2 * np.pi * np.fft.fftfreq(n, d=h)
    spec = (np.fft.fft(v1.values) * np.exp(-1j * omega * x0)).real
    lo, hi = float(spec.min()), float(spec.max())
    return HypothesisReport(
        bochner_pass=bool(lo >= -rel_tol * abs(hi)),
        bochner_min_spectrum=lo,
        bochner_max_spectrum=hi,
    )


def radial_profile(field: ScalarField) -> tuple[np.ndarray, np.ndarray]:
    """(r, V(r)) from the nonnegative half of a one-axis field symmetric about 0."""
    x = field.grid.coords(0)
    keep = x >= -1e-12
    return np.abs(x[keep]), field.values[keep]


def qv_check(r, Vbar, eps_tol: float = 1e-3) -> HypothesisReport:
    """Sample-level certificate for super-quadratic growth with V' <= e3 V^{3/2}.

    The growth exponent 2 + eps is the log-log slope of V over the outer half
    of the radial window; e1, e2 are then the tightest constants making
    V >= e1 r^{2+eps} - e2 hold on every sample.
    """
    r = np.asarray(r, dtype=float)
    V = np.asarray(Vbar, dtype=float)
    if r.ndim != 1 or r.shape != V.shape or r.size < 4:
        raise InvalidProfileError("need matching 1-D radius/profile arrays with >= 4 samples")
    if np.any(np.diff(r) <= 0) or r[0] < 0:
        raise InvalidProfileError("radii must be nonnegative and strictly increasing")
    if np.any(np.diff(V) < -1e-12 * max(1.0, np.max(np.abs(V)))):
        raise InvalidProfileError("radial profile must be nondecreasing")

    tail = (r >= 0.5 * r[-1]) & (r > 0) & (V > 0)
    if tail.sum() < 2:
        return HypothesisReport(qv_pass=False, epsilon=0.0)
    slope = np.polyfit(np.log(r[tail]), np.log(V[tail]), 1)[0]
    eps = float(slope - 2.0)
    if eps <= eps_tol:
        return HypothesisReport(qv_pass=False, epsilon=eps)
    growth = r[tail] ** (2 + eps)
    e1 = float(np.min(V[tail] / growth))
    e2 = float(max(0.0, np.max(e1 * r ** (2 + eps) - V)))

    dV = np.gradient(V, r, edge_order=2)
    rising = dV > 0
    if np.any(rising & (V <= 0)):
        return HypothesisReport(qv_pass=False, epsilon=eps, e1=e1, e2=e2, e3=math.inf)
    e3 = float(np.max(dV[rising] / V[rising] ** 1.5)) if rising.any() else 0.0
    return HypothesisReport(qv_pass=bool(e1 > 0), epsilon=eps, e1=e1, e2=e2, e3=e3)


def validate(potential: MeanFieldPotential) -> HypothesisReport:
    rep = HypothesisReport()
    if potential.v1 is not None and not potential.local:
        rep = rep.merge(bochner_check(potential.v1))
    if potential.grid.is_symmetric():
        r, V = radial_profile(potential.V0)
        try:
            rep = rep.merge(qv_check(r, V))
        except InvalidProfileError:
            rep = rep.merge(HypothesisReport(qv_pass=False))
    return rep


# -- intermediate-scaling kernels -----------------------------------------------------


def check_kernel_resolution(width: float, h: float, extent: float, min_nodes: int = MIN_KERNEL_NODES):
    """Raise ResolutionError unless a kernel of support `width` spans >= min_nodes cells."""
    if width / h < min_nodes:
        needed = int(math.ceil(min_nodes * extent / width)) + 1
        raise ResolutionError(
            f"kernel support {width:.4g} covers only {width / h:.2f} cells of size {h:.4g}; "
            f"need >= {min_nodes}, i.e. at least {needed} points per axis",
            suggested_points=needed,
        )


def scaled_kernel(kernel, beta: float, N: int, lag: UniformGrid | None = None) -> ScalarField:
    """v_N(x) = N^beta v(N^beta x) sampled on `lag`, renormalized to the mass of v.

    `kernel` is a Kernel (sampled exactly) or a ScalarField (linearly
    interpolated, zero outside its grid).
    """
    if not (0.0 < beta <= 1.0):
        raise InvalidExponentError(f"beta must lie in (0, 1], got {beta}")
    if N < 1:
        raise InvalidExponentError(f"N must be positive, got {N}")
    if isinstance(kernel, ScalarField):
        src = kernel
        lag = lag or src.grid
        xs = src.grid.coords(0)
        base = table_kernel(xs, src.values)
        mass = integrate(src)
    else:
        if lag is None:
            raise InvalidGridError("a target grid is required for analytic kernels")
        base = kernel
        mass = kernel.mass
    if N == 1 and isinstance(kernel, ScalarField) and lag is kernel.grid:
        return kernel
    factor = float(N) ** beta
    scaled = base.scaled(factor) if N > 1 else base
    x = lag.coords(0)
    if scaled.half_width > max(abs(x[0]), abs(x[-1])) * (1 + 1e-12):
        raise ResolutionError(
            f"scaled kernel support {scaled.half_width:.4g} exceeds the grid half-width {abs(x[-1]):.4g}"
        )
    vals = scaled(x)
    if mass is None:
        return ScalarField(lag, vals)
    sampled = integrate(ScalarField(lag, vals))
    if sampled == 0:
        raise ResolutionError("scaled kernel falls between grid nodes")
    return ScalarField(lag, vals * (mass / sampled))
