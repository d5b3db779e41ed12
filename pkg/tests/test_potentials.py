import math
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import HARMONIC, gaussian_density
from mfergodic.errors import (
    IncompatibleGridsError,
    InvalidExponentError,
    InvalidGridError,
    InvalidPotentialError,
    InvalidProfileError,
    ResolutionError,
)
from mfergodic.grid import DensityField, ScalarField, UniformGrid, integrate
from mfergodic.potentials import (
    MeanFieldPotential,
    assemble_VN,
    bochner_check,
    bump_kernel,
    check_kernel_resolution,
    cosine_kernel,
    delta_kernel,
    effective_field,
    evaluate,
    gaussian_kernel,
    polynomial,
    qv_check,
    scaled_kernel,
    table_kernel,
)


@pytest.fixture(scope="module")
def grid():
    return UniformGrid.line(-8.0, 8.0, 321)


@pytest.fixture(scope="module")
def mu(grid):
    return DensityField.normalized(grid, gaussian_density(grid.coords(), 0.4, 0.9))


def test_polynomial_constructor():
    p = polynomial([1.0, -2.0, 0.5])
    x = np.array([0.0, 1.0, 2.0])
    np.testing.assert_allclose(p(x), 1 - 2 * x**2 + 0.5 * x**4)


class TestEvaluate:
    def test_free_potential_is_V0(self, grid, mu):
        pot = MeanFieldPotential.build(grid, HARMONIC)
        np.testing.assert_array_equal(evaluate(pot, mu).values, pot.V0.values)

    def test_delta_kernel(self, grid, mu):
        v0 = lambda x: np.cos(x) / (1 + x * x)
        pot = MeanFieldPotential.build(grid, HARMONIC, v0=v0, v1=delta_kernel(grid), g=0.7)
        c = integrate(pot.v0, mu)
        np.testing.assert_allclose(evaluate(pot, mu).values, pot.V0.values + c + 0.7 * mu.values, atol=1e-8)

    def test_gaussian_kernel_on_gaussian_density(self):
        grid = UniformGrid.line(-10.0, 10.0, 801)
        x = grid.coords()
        mu = DensityField.normalized(grid, gaussian_density(x))
        pot = MeanFieldPotential.build(grid, HARMONIC, v1=gaussian_kernel(1.0, normalized=True), g=0.5)
        ref = x**2 + 0.5 * gaussian_density(x, var=2.0)
        np.testing.assert_allclose(evaluate(pot, mu).values, ref, atol=1e-6)

    def test_grid_mismatch(self, grid):
        pot = MeanFieldPotential.build(grid, HARMONIC)
        other = UniformGrid.line(-8.0, 8.0, 101)
        with pytest.raises(IncompatibleGridsError):
            evaluate(pot, DensityField.normalized(other, np.ones(101)))


class TestEffectiveField:
    def test_no_coupling(self, grid, mu):
        v0 = lambda x: 0.3 * np.exp(-x * x)
        pot = MeanFieldPotential.build(grid, HARMONIC, v0=v0)
        c = integrate(pot.v0, mu)
        np.testing.assert_allclose(effective_field(pot, mu).values, pot.V0.values + pot.v0.values + c, atol=1e-14)

    def test_delta_limit_doubles_coupling(self, grid, mu):
        pot = MeanFieldPotential.build(grid, HARMONIC, v1=delta_kernel(grid), g=0.5)
        np.testing.assert_allclose(effective_field(pot, mu).values, pot.V0.values + 2 * 0.5 * mu.values, atol=1e-8)

    def test_local_flag_matches_delta(self, grid, mu):
        local = MeanFieldPotential.build(grid, HARMONIC, g=0.5, local=True)
        delta = MeanFieldPotential.build(grid, HARMONIC, v1=delta_kernel(grid), g=0.5)
        np.testing.assert_allclose(effective_field(local, mu).values, effective_field(delta, mu).values, atol=1e-8)

    def test_gaussian_oracle(self):
        grid = UniformGrid.line(-10.0, 10.0, 801)
        x = grid.coords()
        mu = DensityField.normalized(grid, gaussian_density(x))
        pot = MeanFieldPotential.build(grid, HARMONIC, v1=gaussian_kernel(1.0, normalized=True), g=0.5)
        ref = x**2 + 2 * 0.5 * gaussian_density(x, var=2.0)
        np.testing.assert_allclose(effective_field(pot, mu).values, ref, atol=1e-6)


@pytest.fixture(scope="module")
def pot():
    grid = UniformGrid.line(-4.0, 4.0, 17)
    v0 = lambda x: 0.2 * np.cos(x)
    return MeanFieldPotential.build(grid, HARMONIC, v0=v0, v1=gaussian_kernel(0.8), g=0.6)


class TestAssembleVN:
    def test_two_particles(self, pot):
        g2 = pot.grid.power(2)
        X1, X2 = g2.mesh()
        ref = X1**2 + X2**2 + 0.2 * np.cos(X1) + 0.2 * np.cos(X2) + 2 * 0.6 * np.exp(-0.5 * ((X1 - X2) / 0.8) ** 2)
        np.testing.assert_allclose(assemble_VN(pot, 2, g2).values, ref, atol=1e-12)

    def test_free_sum(self):
        grid = UniformGrid.line(-3.0, 3.0, 13)
        pot = MeanFieldPotential.build(grid, HARMONIC)
        X = pot.grid.power(3).mesh()
        np.testing.assert_array_equal(assemble_VN(pot, 3, pot.grid.power(3)).values, sum(x * x for x in X))

    def test_three_particles_random_nodes(self, pot):
        g3 = pot.grid.power(3)
        VN = assemble_VN(pot, 3, g3).values
        x = pot.grid.coords()
        rng = np.random.default_rng(5)
        for _ in range(20):
            idx = rng.integers(0, 17, size=3)
            pts = x[idx]
            ref = 0.0
            for i in range(3):
                ref += pts[i] ** 2
                others = [k for k in range(3) if k != i]
                ref += sum(0.2 * np.cos(pts[k]) for k in others) / 2
                ref += 0.6 * sum(np.exp(-0.5 * ((pts[i] - pts[k]) / 0.8) ** 2) for k in others) / 2
            assert VN[tuple(idx)] == pytest.approx(ref, abs=1e-12)

    def test_errors(self, pot):
        with pytest.raises(InvalidPotentialError):
            assemble_VN(pot, 1, pot.grid)
        with pytest.raises(IncompatibleGridsError):
            assemble_VN(pot, 3, pot.grid.power(2))
        with pytest.raises(IncompatibleGridsError):
            assemble_VN(pot, 2, UniformGrid.line(-4.0, 4.0, 19).power(2))

    @settings(max_examples=20, deadline=None)
    @given(perm=st.permutations([0, 1, 2]))
    def test_permutation_invariance(self, pot, perm):
        VN = assemble_VN(pot, 3, pot.grid.power(3)).values
        np.testing.assert_allclose(np.transpose(VN, perm), VN, atol=1e-12)


class TestBochner:
    def test_gaussian_passes(self):
        lag = UniformGrid.line(-10.0, 10.0, 401)
        rep = bochner_check(gaussian_kernel(1.0).sample(lag))
        assert rep.bochner_pass
        assert rep.bochner_min_spectrum >= -1e-10 * rep.bochner_max_spectrum

    def test_cosine_on_commensurate_grid(self):
        # n h = 4 pi: the samples are exactly periodic on the DFT window
        n = 101
        h = 4 * math.pi / n
        half = 0.5 * (n - 1) * h
        lag = UniformGrid.line(-half, half, n)
        assert bochner_check(cosine_kernel(1.0).sample(lag)).bochner_pass

    def test_truncated_parabola_fails(self):
        lag = UniformGrid.line(-4.0, 4.0, 401)
        x = lag.coords()
        rep = bochner_check(ScalarField(lag, np.where(np.abs(x) <= 1, 1 - x * x, 0.0)))
        assert not rep.bochner_pass
        assert rep.bochner_min_spectrum < 0

    def test_asymmetric_grid(self):
        with pytest.raises(InvalidGridError):
            bochner_check(ScalarField(UniformGrid.line(-1.0, 2.0, 31), np.ones(31)))

    @settings(max_examples=100, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), m=st.integers(2, 12))
    def test_positive_definite_quadratic_form(self, seed, m):
        kern = gaussian_kernel(0.9)
        assert bochner_check(kern.sample(UniformGrid.line(-10.0, 10.0, 401))).bochner_pass
        rng = np.random.default_rng(seed)
        c = rng.normal(size=m)
        x = rng.uniform(-4, 4, size=m)
        Q = c @ kern(x[:, None] - x[None, :]) @ c
        assert Q >= -1e-8


class TestQV:
    def test_quartic_passes(self):
        r = np.linspace(0, 5, 201)
        rep = qv_check(r, r**4)
        assert rep.qv_pass
        assert rep.epsilon >= 1
        assert rep.epsilon == pytest.approx(2.0, abs=1e-9)
        assert rep.e1 == pytest.approx(1.0, rel=1e-9)
        assert rep.e2 == pytest.approx(0.0, abs=1e-9)
        assert math.isfinite(rep.e3)

    def test_quadratic_fails(self):
        r = np.linspace(0, 5, 201)
        assert not qv_check(r, r**2).qv_pass

    def test_log_corrected_quadratic(self):
        # the fitted exponent on [2.5, 5] is about 2.4: passes on this window
        r = np.linspace(0, 5, 201)
        rep = qv_check(r, r**2 * (1 + np.log1p(r**2)))
        assert rep.qv_pass
        assert 0.2 < rep.epsilon < 0.6
        V = r**2 * (1 + np.log1p(r**2))
        assert np.all(V >= rep.e1 * r ** (2 + rep.epsilon) - rep.e2 - 1e-12)

    def test_non_increasing_profile(self):
        r = np.linspace(0, 5, 50)
        with pytest.raises(InvalidProfileError):
            qv_check(r, np.cos(r))
        with pytest.raises(InvalidProfileError):
            qv_check(r[::-1], r**4)


@pytest.fixture(scope="module")
def lag():
    return UniformGrid.line(-2.0, 2.0, 1601)


class TestScaledKernel:
    def test_N1_unchanged(self, lag):
        v = bump_kernel(1.0).sample(lag)
        assert scaled_kernel(v, 0.5, 1) is v

    def test_mass_invariance(self, lag):
        v = bump_kernel(1.0)
        out = scaled_kernel(v, 0.5, 4, lag)
        assert integrate(out) == pytest.approx(1.0, abs=1e-6)

    def test_peak_scales_with_N_beta(self, lag):
        v = bump_kernel(1.0)
        out = scaled_kernel(v, 0.5, 4, lag)
        centre = lag.points[0] // 2
        assert out.values[centre] == pytest.approx(2.0 * float(v(0.0)), abs=1e-8)

    def test_sampled_input(self, lag):
        v = bump_kernel(1.0).sample(lag)
        out = scaled_kernel(v, 0.2, 3)
        assert integrate(out) == pytest.approx(integrate(v), abs=1e-12)

    @pytest.mark.parametrize("beta", [0.0, -0.1, 1.5])
    def test_beta_range(self, lag, beta):
        with pytest.raises(InvalidExponentError):
            scaled_kernel(bump_kernel(1.0), beta, 4, lag)

    def test_support_exceeds_grid(self):
        with pytest.raises(ResolutionError):
            scaled_kernel(bump_kernel(10.0), 0.1, 2, UniformGrid.line(-2.0, 2.0, 101))

    def test_resolution_check_suggests_points(self):
        with pytest.raises(ResolutionError) as info:
            check_kernel_resolution(0.5, 0.25, 12.0)
        assert info.value.suggested_points >= 145


def test_table_kernel_interpolates():
    k = table_kernel([-1.0, 0.0, 1.0], [0.0, 2.0, 0.0])
    np.testing.assert_allclose(k(np.array([-0.5, 0.0, 0.25, 3.0])), [1.0, 2.0, 1.5, 0.0])
    assert k.mass == pytest.approx(2.0)


def test_potential_invariants(grid):
    with pytest.raises(InvalidPotentialError):
        MeanFieldPotential.build(grid, HARMONIC, v1=lambda x: x, g=1.0)
    with pytest.raises(InvalidPotentialError):
        MeanFieldPotential.build(grid, lambda x: -(x**2))
    with pytest.raises(InvalidPotentialError):
        MeanFieldPotential.build(grid, HARMONIC, g=-1.0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_evaluate_is_affine(seed):
    grid = UniformGrid.line(-5.0, 5.0, 81)
    pot = MeanFieldPotential.build(
        grid, HARMONIC, v0=lambda x: np.sin(x) ** 2, v1=gaussian_kernel(0.7), g=1.3
    )
    rng = np.random.default_rng(seed)
    m1 = DensityField.normalized(grid, rng.random(81))
    m2 = DensityField.normalized(grid, rng.random(81))
    mid = DensityField.normalized(grid, 0.5 * (m1.values + m2.values))
    lhs = evaluate(pot, mid).values
    rhs = 0.5 * (evaluate(pot, m1).values + evaluate(pot, m2).values)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)
