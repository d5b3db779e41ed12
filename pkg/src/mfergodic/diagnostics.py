"""Convergence and chaos metrics: Fisher information, entropies, TV and Wasserstein
distances, moments, drift discrepancy and path entropy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConsistencyError, IncompatibleGridsError, InvalidExponentError, UnsupportedDimensionError
from .grid import ScalarField, UniformGrid, _same_grid, integrate_values, marginalize, trapezoid_weights
from .meanfield import MeanFieldGroundState
from .nparticle import NParticleGroundState
from .potentials import MeanFieldPotential, effective_field

ENTROPY_FLOOR = 1e-14
FISHER_FLOOR = 1e-14
QUANTILE_NODES = 4096
INF = math.inf


# -- Fisher information ---------------------------------------------------------------


def fisher_information(rho: ScalarField, normalized: bool = False, floor: float = FISHER_FLOOR) -> float:
    """int |grad rho|^2 / rho over rho > floor*max; divided by the axis count if normalized."""
    vals = rho.values
    ok = vals > floor * vals.max()
    total = np.zeros_like(vals)
    for k, h in enumerate(rho.grid.spacing):
        d = np.gradient(vals, h, axis=k, edge_order=2)
        total += d * d
    dens = np.where(ok, total / np.where(ok, vals, 1.0), 0.0)
    I = float(integrate_values(dens, rho.grid))
    return I / rho.grid.dims if normalized else I


@dataclass(frozen=True)
class FisherStructureReport:
    instances: int
    superadditivity_ok: bool
    monotonicity_ok: bool
    product_ok: bool
    min_superadditivity_gap: float
    max_monotonicity_violation: float
    max_product_error: float

    @property
    def passed(self) -> bool:
        return self.superadditivity_ok and self.monotonicity_ok and self.product_ok


def fisher_structure_tests(densities, products=(), tol: float = 1e-6) -> FisherStructureReport:
    """Check superadditivity and marginal monotonicity on symmetric densities,
    and additivity on product densities given as (rhoN, rho1) pairs."""
    gaps, viol, perr = [], [], []
    for rho in densities:
        N = rho.grid.dims
        IN = fisher_information(rho)
        for l in range(1, N):
            left = marginalize(rho, range(l))
            right = marginalize(rho, range(l, N))
            gaps.append(IN - fisher_information(left) - fisher_information(right))
            viol.append(fisher_information(left, normalized=True) - IN / N)
    for rhoN, rho1 in products:
        perr.append(abs(fisher_information(rhoN, normalized=True) - fisher_information(rho1)))
    mg = min(gaps) if gaps else 0.0
    mv = max(viol) if viol else 0.0
    mp = max(perr) if perr else 0.0
    return FisherStructureReport(
        instances=len(gaps) + len(perr),
        superadditivity_ok=mg >= -tol,
        monotonicity_ok=mv <= tol,
        product_ok=mp <= tol,
        min_superadditivity_gap=mg,
        max_monotonicity_violation=mv,
        max_product_error=mp,
    )


# -- entropies -------------------------------------------------------------------


def relative_entropy(rho1: ScalarField, rho2: ScalarField, floor: float = ENTROPY_FLOOR) -> float:
    """int rho1 log(rho1/rho2) over rho1 > floor*max; +inf when rho2 vanishes there.

    A relative floor on rho2 would flag ordinary Gaussian tails as disjoint
    support, so only true zeros (or subnormal underflow) trigger the sentinel.
    """
    _same_grid(rho1.grid, rho2.grid, "densities")
    a, b = rho1.values, rho2.values
    on = a > floor * a.max()
    if np.any(on & (b < np.finfo(float).tiny)):
        return INF
    integrand = np.zeros_like(a)
    integrand[on] = a[on] * (np.log(a[on]) - np.log(b[on]))
    return float(integrate_values(integrand, rho1.grid))


def entropy(rho: ScalarField, floor: float = ENTROPY_FLOOR) -> float:
    """int rho log rho (the entropy relative to Lebesgue measure)."""
    a = rho.values
    on = a > floor * a.max()
    integrand = np.zeros_like(a)
    integrand[on] = a[on] * np.log(a[on])
    return float(integrate_values(integrand, rho.grid))


def _product_log(log1: np.ndarray, N: int) -> np.ndarray:
    out = log1
    for _ in range(N - 1):
        out = np.add.outer(out, log1)
    return out


@dataclass(frozen=True)
class EntropyResult:
    direct: float
    decomposed: float

    @property
    def value(self) -> float:
        return self.direct


def entropy_per_particle_pair(
    stateN: NParticleGroundState, mf: MeanFieldGroundState, floor: float = ENTROPY_FLOOR
) -> EntropyResult:
    """(1/N) H(rho_N | rho0^N) by direct N-dimensional quadrature and by the
    decomposition (1/N) int rho_N log rho_N - int rho_N^(1) log rho0."""
    N = stateN.N
    for k in range(N):
        _same_grid(stateN.grid.axis_grid(k), mf.grid, "N-particle axis and mean-field grid")
    r0 = mf.rho0.values
    if np.any(r0 <= 0):
        return EntropyResult(INF, INF)
    log0 = np.log(r0)
    a = stateN.rhoN.values
    on = a > floor * a.max()
    integrand = np.zeros_like(a)
    integrand[on] = a[on] * (np.log(a[on]) - _product_log(log0, N)[on])
    direct = float(integrate_values(integrand, stateN.grid)) / N

    cross = float(integrate_values(stateN.marginal1.values * log0, mf.grid))
    decomposed = entropy(stateN.rhoN, floor) / N - cross
    return EntropyResult(direct, decomposed)


def entropy_per_particle(
    stateN: NParticleGroundState,
    mf: MeanFieldGroundState,
    agree_tol: float = 1e-6,
    fail_tol: float = 1e-4,
) -> float:
    res = entropy_per_particle_pair(stateN, mf)
    gap = abs(res.direct - res.decomposed)
    if gap > fail_tol:
        raise ConsistencyError(f"entropy paths disagree by {gap:.3g}")
    if gap > agree_tol:
        import warnings

        warnings.warn(f"entropy paths disagree by {gap:.3g} (> {agree_tol:g})")
    return res.direct


# -- distances ---------------------------------------------------------------------


def tv_distance(rho1: ScalarField, rho2: ScalarField) -> float:
    _same_grid(rho1.grid, rho2.grid, "densities")
    return 0.5 * float(integrate_values(np.abs(rho1.values - rho2.values), rho1.grid))


def l1_distance(rho1: ScalarField, rho2: ScalarField) -> float:
    return 2.0 * tv_distance(rho1, rho2)


def _cdf(rho: ScalarField) -> np.ndarray:
    v = rho.values
    h = rho.grid.spacing[0]
    F = np.concatenate([[0.0], np.cumsum(0.5 * h * (v[1:] + v[:-1]))])
    return F / F[-1]


def quantiles(rho: ScalarField, u: np.ndarray) -> np.ndarray:
    """Generalized inverse of the piecewise-linear trapezoid CDF."""
    x = rho.grid.coords(0)
    F = _cdf(rho)
    j = np.clip(np.searchsorted(F, u, side="left"), 1, len(F) - 1)
    lo, hi = F[j - 1], F[j]
    dF = hi - lo
    t = np.where(dF > 0, (u - lo) / np.where(dF > 0, dF, 1.0), 0.0)
    return x[j - 1] + np.clip(t, 0.0, 1.0) * (x[j] - x[j - 1])


def wasserstein_1d(rho1: ScalarField, rho2: ScalarField, p: float = 1.0, nodes: int = QUANTILE_NODES) -> float:
    if rho1.grid.dims != 1 or rho2.grid.dims != 1:
        raise UnsupportedDimensionError(
            "exact Wasserstein distances are one-dimensional; use wasserstein_bound"
        )
    if p < 1:
        raise InvalidExponentError(f"p must be >= 1, got {p}")
    u = (np.arange(nodes) + 0.5) / nodes
    d = np.abs(quantiles(rho1, u) - quantiles(rho2, u))
    return float(np.mean(d**p) ** (1.0 / p))


def moment(rho: ScalarField, k: float) -> float:
    """int |x|^k rho(x) dx with |.| the Euclidean norm on the grid."""
    r2 = sum(m * m for m in rho.grid.mesh())
    return float(integrate_values(r2 ** (0.5 * k) * rho.values, rho.grid))


def wasserstein_bound(
    rho1: ScalarField, rho2: ScalarField, p: float, k: float, form: str = "holder"
) -> float:
    """Upper bound on W_p from total variation and k-th moments (p < k).

    form="holder": 2^{1-1/p} (M_k + M_k')^{1/k} (2 TV)^{(k-p)/(kp)}.
    form="printed": same prefactor with TV^{k/((k-p)p)}, kept for comparison.
    """
    if not p < k:
        raise InvalidExponentError(f"need p < k, got p={p}, k={k}")
    if p < 1:
        raise InvalidExponentError(f"p must be >= 1, got {p}")
    tv = tv_distance(rho1, rho2)
    pref = 2.0 ** (1.0 - 1.0 / p) * (moment(rho1, k) + moment(rho2, k)) ** (1.0 / k)
    if form == "holder":
        return pref * (2.0 * tv) ** ((k - p) / (k * p))
    if form == "printed":
        return pref * tv ** (k / ((k - p) * p))
    raise ValueError(f"unknown form {form!r}")


def csiszar_kullback_ok(tv: float, kl: float, slack: float = 1e-8) -> bool:
    return tv <= math.sqrt(2.0 * max(kl, 0.0)) + slack


# -- drift discrepancy and path entropy ------------------------------------------------


@dataclass(frozen=True)
class DriftDiscrepancy:
    direct: float
    formula: float

    @property
    def relative_gap(self) -> float:
        scale = max(abs(self.direct), abs(self.formula))
        return abs(self.direct - self.formula) / scale if scale > 0 else 0.0


def _axis_weights(grid: UniformGrid, skip: int) -> np.ndarray:
    w = np.ones(())
    for k in range(grid.dims):
        wk = np.ones(grid.points[k]) if k == skip else trapezoid_weights(grid, k)
        w = np.multiply.outer(w, wk)
    return w


def drift_discrepancy(
    stateN: NParticleGroundState, mf: MeanFieldGroundState, potential: MeanFieldPotential
) -> DriftDiscrepancy:
    """int |grad_1 log rho_N - alpha(x_1)|^2 rho_N, directly and through the
    Euler-Lagrange identity 2 E_KN + 2 int W[rho0] rho_N^(1) - mu0."""
    N = stateN.N
    grid = stateN.grid
    for k in range(N):
        _same_grid(grid.axis_grid(k), mf.grid, "N-particle axis and mean-field grid")
    phi0 = mf.phi0.values
    if np.any(phi0 <= 0):
        raise ConsistencyError("mean-field amplitude must be strictly positive")
    h = grid.spacing[0]
    shape = [1] * N
    shape[0] = -1
    p0 = phi0.reshape(shape)
    psi = stateN.phiN.values / p0
    # |grad_1 log rho_N - alpha|^2 rho_N = 4 |grad_1 psi|^2 phi0^2, summed on the
    # edges of axis 0 with phi0^2 replaced by phi0_j phi0_{j+1}
    edge = (phi0[:-1] * phi0[1:]).reshape(shape) * (np.diff(psi, axis=0) / h) ** 2
    w = _axis_weights(grid, 0)
    direct = 4.0 * h * float(np.sum(edge * w[:-1]))

    W = effective_field(potential, mf.rho0).values
    cross = float(integrate_values(W * stateN.marginal1.values, mf.grid))
    formula = 2.0 * stateN.E_KN + 2.0 * cross - mf.mu0
    return DriftDiscrepancy(direct, formula)


def path_entropy(
    stateN: NParticleGroundState,
    mf: MeanFieldGroundState,
    T: float,
    girsanov_constant: float = 0.25,
    potential: MeanFieldPotential | None = None,
    initial_sign: float = 1.0,
    entropy_value: float | None = None,
    discrepancy: float | None = None,
) -> float:
    """Per-particle path-space relative entropy on [0, T] in the stationary regime:
    initial-law entropy plus girsanov_constant * T * drift discrepancy."""
    if not T > 0:
        raise ValueError(f"horizon T must be positive, got {T}")
    H = entropy_per_particle(stateN, mf) if entropy_value is None else entropy_value
    if discrepancy is None:
        if potential is None:
            raise ValueError("potential is required to evaluate the drift discrepancy")
        discrepancy = drift_discrepancy(stateN, mf, potential).direct
    return initial_sign * H + girsanov_constant * T * discrepancy


# -- report ------------------------------------------------------------------------

CSV_COLUMNS = (
    "row",
    "N",
    "E",
    "E_K",
    "E_P",
    "mu",
    "entropy_per_particle",
    "marginal_L1_gap",
    "marginal_TV",
    "marginal_W1",
    "marginal_W2",
    "drift_discrepancy",
    "path_entropy",
    "moment_Mk",
    "J_hat",
    "J_stderr",
    "sde_tv",
)


@dataclass
class ReportRow:
    row: str
    N: int | None
    E: float
    E_K: float
    E_P: float
    mu: float
    entropy_per_particle: float = math.nan
    marginal_L1_gap: float = math.nan
    marginal_TV: float = math.nan
    marginal_W1: float = math.nan
    marginal_W2: float = math.nan
    drift_discrepancy: float = math.nan
    path_entropy: float = math.nan
    moment_Mk: float = math.nan
    J_hat: float = math.nan
    J_stderr: float = math.nan
    sde_tv: float = math.nan
    extra: dict = field(default_factory=dict)

    def as_list(self) -> list:
        return [getattr(self, c) for c in CSV_COLUMNS]


@dataclass
class ConvergenceReport:
    meanfield: ReportRow
    rows: list[ReportRow] = field(default_factory=list)
    hypotheses: dict = field(default_factory=dict)
    uniqueness_warning: bool = False
    scaling: list[dict] = field(default_factory=list)
    settings: dict = field(default_factory=dict)

    def all_rows(self) -> list[ReportRow]:
        return [self.meanfield, *self.rows]

    def row(self, N: int) -> ReportRow:
        for r in self.rows:
            if r.N == N:
                return r
        raise KeyError(N)


def meanfield_row(mf: MeanFieldGroundState, k: float = 4.0) -> ReportRow:
    return ReportRow(
        row="meanfield",
        N=None,
        E=mf.E,
        E_K=mf.E_K,
        E_P=mf.E_P,
        mu=mf.mu0,
        entropy_per_particle=entropy(mf.rho0),
        moment_Mk=moment(mf.rho0, k),
        extra={"J": mf.value, "residual": mf.residual_norm},
    )


def nparticle_row(
    stateN: NParticleGroundState,
    mf: MeanFieldGroundState,
    potential: MeanFieldPotential,
    T: float = 1.0,
    girsanov_constant: float = 0.25,
    k: float = 4.0,
) -> ReportRow:
    """Every diagnostic for one N against the mean-field reference."""
    ent = entropy_per_particle_pair(stateN, mf)
    dd = drift_discrepancy(stateN, mf, potential)
    m1, r0 = stateN.marginal1, mf.rho0
    return ReportRow(
        row=f"N={stateN.N}",
        N=stateN.N,
        E=stateN.E_N,
        E_K=stateN.E_KN,
        E_P=stateN.E_PN,
        mu=stateN.muN,
        entropy_per_particle=ent.direct,
        marginal_L1_gap=l1_distance(m1, r0),
        marginal_TV=tv_distance(m1, r0),
        marginal_W1=wasserstein_1d(m1, r0, 1),
        marginal_W2=wasserstein_1d(m1, r0, 2),
        drift_discrepancy=dd.direct,
        path_entropy=path_entropy(
            stateN, mf, T, girsanov_constant, entropy_value=ent.direct, discrepancy=dd.direct
        ),
        moment_Mk=moment(m1, k),
        extra={
            "entropy_decomposed": ent.decomposed,
            "drift_formula": dd.formula,
            "mu_per_particle": stateN.mu_per_particle,
            "marginal_KL": relative_entropy(m1, r0),
            "residual": stateN.residual_norm,
        },
    )
