"""Uniform tensor grids and the sampled-field kernels every solver is built on.

Fields live on axis-aligned boxes with at most four axes. All kernels are
second-order finite-difference / trapezoidal and return fresh arrays.
"""

from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass
from itertools import product as iproduct
from typing import Sequence

import numpy as np

from .errors import (
    IncompatibleGridsError,
    InvalidAxesError,
    InvalidGridError,
    OutOfDomainError,
)

MIN_POINTS = 8
MAX_AXES = 4


@dataclass(frozen=True)
class UniformGrid:
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    points: tuple[int, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        up = tuple(float(v) for v in np.atleast_1d(self.upper))
        pts = tuple(int(v) for v in np.atleast_1d(self.points))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)
        object.__setattr__(self, "points", pts)
        if not (len(lo) == len(up) == len(pts)) or len(lo) == 0:
            raise InvalidGridError("lower, upper and points must have one entry per axis")
        if len(lo) > MAX_AXES:
            raise InvalidGridError(f"at most {MAX_AXES} grid axes are supported, got {len(lo)}")
        for k, (a, b, n) in enumerate(zip(lo, up, pts)):
            if not b > a:
                raise InvalidGridError(f"axis {k}: upper ({b}) must exceed lower ({a})")
            if n < MIN_POINTS:
                raise InvalidGridError(f"axis {k}: need at least {MIN_POINTS} points, got {n}")

    @classmethod
    def line(cls, lower: float, upper: float, points: int) -> "UniformGrid":
        return cls((lower,), (upper,), (points,))

    @property
    def dims(self) -> int:
        return len(self.points)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def size(self) -> int:
        return int(np.prod(self.points))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((b - a) / (n - 1) for a, b, n in zip(self.lower, self.upper, self.points))

    def coords(self, axis: int = 0) -> np.ndarray:
        # Built around the box centre so that symmetric boxes give exactly
        # antisymmetric coordinates (x_j == -x_{n-1-j}).
        a, b, n = self.lower[axis], self.upper[axis], self.points[axis]
        h = (b - a) / (n - 1)
        return 0.5 * (a + b) + h * (np.arange(n) - 0.5 * (n - 1))

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*[self.coords(k) for k in range(self.dims)], indexing="ij")

    def axis_grid(self, axis: int) -> "UniformGrid":
        return UniformGrid((self.lower[axis],), (self.upper[axis],), (self.points[axis],))

    def power(self, n: int) -> "UniformGrid":
        """n-fold product of a one-axis grid (the N-particle configuration grid)."""
        if self.dims != 1:
            raise InvalidGridError("power() expects a one-axis grid")
        return UniformGrid(self.lower * n, self.upper * n, self.points * n)

    def is_symmetric(self, axis: int = 0) -> bool:
        a, b = self.lower[axis], self.upper[axis]
        return abs(a + b) <= 1e-12 * max(abs(a), abs(b))

    def lag_grid(self) -> "UniformGrid":
        """Symmetric grid of all pairwise differences x_i - x_j of a one-axis grid."""
        if self.dims != 1:
            raise InvalidGridError("lag_grid() expects a one-axis grid")
        width = self.upper[0] - self.lower[0]
        return UniformGrid.line(-width, width, 2 * self.points[0] - 1)

    def contains(self, point, tol: float = 1e-12) -> bool:
        p = np.asarray(point, dtype=float)
        lo, up = np.asarray(self.lower), np.asarray(self.upper)
        span = up - lo
        return bool(np.all(p >= lo - tol * span) and np.all(p <= up + tol * span))


class ScalarField:
    """Real samples on every node of a grid, stored with the grid's shape."""

    def __init__(self, grid: UniformGrid, values):
        arr = np.array(values, dtype=float)
        if arr.size != grid.size:
            raise InvalidGridError(
                f"field has {arr.size} values but the grid has {grid.size} nodes"
            )
        self.grid = grid
        self.values = arr.reshape(grid.shape)

    @classmethod
    def from_function(cls, grid: UniformGrid, fn) -> "ScalarField":
        return cls(grid, fn(*grid.mesh()))

    def __repr__(self):
        return f"{type(self).__name__}(shape={self.grid.shape})"


class DensityField(ScalarField):
    """Nonnegative field with unit trapezoidal mass."""

    MASS_TOL = 1e-10

    def __init__(self, grid: UniformGrid, values):
        super().__init__(grid, values)
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise ValueError("density values must be finite and nonnegative")
        mass = integrate(ScalarField(grid, self.values))
        if abs(mass - 1.0) > self.MASS_TOL:
            raise ValueError(f"density mass is {mass!r}, expected 1 (use DensityField.normalized)")

    @classmethod
    def normalized(cls, grid_or_field, values=None) -> "DensityField":
        if isinstance(grid_or_field, ScalarField):
            grid, values = grid_or_field.grid, grid_or_field.values
        else:
            grid = grid_or_field
        arr = np.clip(np.asarray(values, dtype=float).reshape(grid.shape), 0.0, None)
        mass = integrate(ScalarField(grid, arr))
        if not mass > 0:
            raise ValueError("cannot normalize a field with zero mass")
        return cls(grid, arr / mass)


def _check_grid(grid: UniformGrid):
    if any(n < MIN_POINTS for n in grid.points):
        raise InvalidGridError(f"need at least {MIN_POINTS} points per axis")


def _same_grid(a: UniformGrid, b: UniformGrid, what: str = "fields"):
    if a.points != b.points or not (
        np.allclose(a.lower, b.lower, rtol=0, atol=1e-12)
        and np.allclose(a.upper, b.upper, rtol=0, atol=1e-12)
    ):
        raise IncompatibleGridsError(f"{what} live on different grids: {a} vs {b}")


# -- differential operators ---------------------------------------------------


def gradient(field: ScalarField) -> list[ScalarField]:
    """Central differences inside, one-sided second order at the box faces."""
    _check_grid(field.grid)
    out = []
    for k, h in enumerate(field.grid.spacing):
        out.append(ScalarField(field.grid, np.gradient(field.values, h, axis=k, edge_order=2)))
    return out


def laplacian_values(values: np.ndarray, spacing: Sequence[float]) -> np.ndarray:
    """(2d+1)-point Laplacian with zero ghost values outside the box."""
    out = np.zeros_like(values)
    nd = values.ndim
    for k, h in enumerate(spacing):
        inv = 1.0 / (h * h)
        lo = [slice(None)] * nd
        hi = [slice(None)] * nd
        lo[k] = slice(None, -1)
        hi[k] = slice(1, None)
        lo, hi = tuple(lo), tuple(hi)
        out[lo] += inv * values[hi]
        out[hi] += inv * values[lo]
        out -= (2.0 * inv) * values
    return out


def laplacian(field: ScalarField) -> ScalarField:
    _check_grid(field.grid)
    return ScalarField(field.grid, laplacian_values(field.values, field.grid.spacing))


# -- quadrature -----------------------------------------------------------------


def trapezoid_weights(grid: UniformGrid, axis: int) -> np.ndarray:
    h = grid.spacing[axis]
    w = np.full(grid.points[axis], h)
    w[0] = w[-1] = 0.5 * h
    return w


def integrate_values(values: np.ndarray, grid: UniformGrid, axes=None) -> np.ndarray | float:
    """Trapezoidal integral over `axes` (default all); remaining axes keep their order."""
    axes = range(grid.dims) if axes is None else axes
    result = values
    for k in sorted(axes, reverse=True):
        result = np.tensordot(result, trapezoid_weights(grid, k), axes=([k], [0]))
    return float(result) if np.ndim(result) == 0 else result


def integrate(field: ScalarField, weight: ScalarField | None = None) -> float:
    vals = field.values
    if weight is not None:
        _same_grid(field.grid, weight.grid)
        vals = vals * weight.values
    return float(integrate_values(vals, field.grid))


def marginalize(density: ScalarField, kept_axes) -> DensityField:
    grid = density.grid
    kept = sorted(set(int(a) for a in kept_axes))
    if not kept or kept[0] < 0 or kept[-1] >= grid.dims:
        raise InvalidAxesError(f"kept axes {list(kept_axes)} invalid for a {grid.dims}-axis grid")
    dropped = [k for k in range(grid.dims) if k not in kept]
    vals = integrate_values(density.values, grid, dropped) if dropped else density.values
    sub = UniformGrid(
        tuple(grid.lower[k] for k in kept),
        tuple(grid.upper[k] for k in kept),
        tuple(grid.points[k] for k in kept),
    )
    return DensityField.normalized(sub, vals)


# -- convolution ----------------------------------------------------------------


def convolve(field: ScalarField, kernel: ScalarField) -> ScalarField:
    """h * sum_j f(x_j) k(x_i - x_j) on a one-axis grid, via zero-padded FFT.

    The kernel must be sampled on a symmetric grid with an odd number of nodes
    and the field's spacing; lags it does not cover count as zero.
    """
    fg, kg = field.grid, kernel.grid
    if fg.dims != 1 or kg.dims != 1:
        raise InvalidGridError("convolve supports one-axis fields and kernels")
    h = fg.spacing[0]
    if abs(kg.spacing[0] - h) > 1e-9 * h:
        raise IncompatibleGridsError(
            f"kernel spacing {kg.spacing[0]} differs from field spacing {h}"
        )
    if kg.points[0] % 2 == 0 or not kg.is_symmetric():
        raise IncompatibleGridsError("kernel must be sampled on a symmetric grid with a centre node")
    m = fg.points[0]
    kn = kg.points[0]
    c = kn // 2
    size = m + kn - 1
    nfft = 1 << (size - 1).bit_length()
    full = np.fft.irfft(
        np.fft.rfft(field.values, nfft) * np.fft.rfft(kernel.values, nfft), nfft
    )[:size]
    return ScalarField(fg, h * full[c : c + m])


# -- interpolation ----------------------------------------------------------------


def interpolate_many(field: ScalarField, points, clamp: bool = False) -> np.ndarray:
    """Multilinear interpolation at an (n, d) array of points."""
    grid = field.grid
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != grid.dims:
        raise InvalidGridError(f"points have {pts.shape[1]} coordinates, grid has {grid.dims} axes")
    lo = np.asarray(grid.lower)
    up = np.asarray(grid.upper)
    if clamp:
        pts = np.clip(pts, lo, up)
    else:
        span = up - lo
        bad = np.any((pts < lo - 1e-12 * span) | (pts > up + 1e-12 * span), axis=1)
        if np.any(bad):
            raise OutOfDomainError(f"point {pts[np.argmax(bad)]} lies outside the grid box")
    h = np.asarray(grid.spacing)
    n = np.asarray(grid.points)
    t = (pts - lo) / h
    # snap round-off so that node coordinates return node values exactly
    near = np.round(t)
    t = np.where(np.abs(t - near) < 1e-9, near, t)
    idx = np.clip(np.floor(t).astype(np.int64), 0, n - 2)
    frac = np.clip(t - idx, 0.0, 1.0)
    out = np.zeros(len(pts))
    vals = field.values
    for corner in iproduct((0, 1), repeat=grid.dims):
        c = np.asarray(corner)
        w = np.prod(np.where(c == 1, frac, 1.0 - frac), axis=1)
        out += w * vals[tuple((idx + c).T)]
    return out


def interpolate(field: ScalarField, point) -> float:
    return float(interpolate_many(field, np.asarray(point, dtype=float).reshape(1, -1))[0])


# -- serialization ----------------------------------------------------------------


def to_bytes(field: ScalarField) -> bytes:
    """Header (dims, lower/upper bounds, counts; little-endian 64-bit) + row-major float64 payload."""
    g = field.grid
    head = struct.pack("<q", g.dims)
    head += struct.pack(f"<{g.dims}d", *g.lower)
    head += struct.pack(f"<{g.dims}d", *g.upper)
    head += struct.pack(f"<{g.dims}q", *g.points)
    return head + np.ascontiguousarray(field.values, dtype="<f8").tobytes()


def from_bytes(data: bytes) -> ScalarField:
    (d,) = struct.unpack_from("<q", data, 0)
    off = 8
    lower = struct.unpack_from(f"<{d}d", data, off)
    off += 8 * d
    upper = struct.unpack_from(f"<{d}d", data, off)
    off += 8 * d
    pts = struct.unpack_from(f"<{d}q", data, off)
    off += 8 * d
    grid = UniformGrid(lower, upper, pts)
    vals = np.frombuffer(data, dtype="<f8", offset=off, count=grid.size)
    return ScalarField(grid, vals.copy())


def save_binary(field: ScalarField, path):
    with open(path, "wb") as fh:
        fh.write(to_bytes(field))


def load_binary(path) -> ScalarField:
    with open(path, "rb") as fh:
        return from_bytes(fh.read())


def to_csv(field: ScalarField, path=None) -> str:
    g = field.grid
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"x{k}" for k in range(g.dims)] + ["value"])
    mesh = [m.ravel() for m in g.mesh()]
    for row in zip(*mesh, field.values.ravel()):
        writer.writerow([repr(float(v)) for v in row])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
