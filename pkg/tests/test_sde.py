import math

import numpy as np
import pytest

from conftest import HARMONIC, SQRT2
from mfergodic.diagnostics import quantiles
from mfergodic.errors import InstabilityError, InvalidGridError
from mfergodic.grid import ScalarField, UniformGrid
from mfergodic.meanfield import solve_ground_state
from mfergodic.nparticle import optimal_drift_N, solve_linear_ground_state
from mfergodic.potentials import MeanFieldPotential
from mfergodic.sde import (
    SimConfig,
    meanfield_cost,
    nparticle_cost,
    path_generator,
    sample_density,
    simulate_meanfield,
    simulate_nparticle,
    stationarity_check,
    stats_from_samples,
)


@pytest.fixture(scope="module")
def ou(harmonic_fine):
    pot, st0 = harmonic_fine
    return st0.drift[0], meanfield_cost(st0, pot), st0.rho0


@pytest.fixture(scope="module")
def long_run(ou):
    drift, cost, rho = ou
    cfg = SimConfig(dt=1e-3, T=200.0, burn_in=5.0, n_paths=64, seed=3)
    return simulate_meanfield(drift, cfg, cost, rho)


@pytest.mark.slow
class TestMeanField:
    def test_ergodic_cost(self, long_run):
        assert long_run.J_hat == pytest.approx(SQRT2, rel=0.02)
        assert long_run.stderr > 0
        assert len(long_run.block_means) >= 16

    def test_stationary_variance(self, long_run):
        assert long_run.variance == pytest.approx(1 / SQRT2, rel=0.02)

    def test_histogram_is_density(self, long_run):
        assert np.sum(long_run.probabilities) == pytest.approx(1.0, abs=1e-10)
        h = long_run.histogram
        assert float(np.sum(h.values) * h.grid.spacing[0]) == pytest.approx(1.0, abs=1e-10)

    def test_free_brownian(self):
        grid = UniformGrid.line(-50, 50, 201)
        zero = ScalarField(grid, np.zeros(201))
        cfg = SimConfig(dt=1e-2, T=1.0, burn_in=0.0, n_paths=4000, seed=1)
        stats = simulate_meanfield(zero, cfg, zero)
        assert stats.J_hat == 0.0
        # records at t = 0.1, ..., 1.0 pool to variance 2 * mean(t) = 1.1
        assert stats.variance == pytest.approx(1.1, rel=0.05)


def test_reproducible_and_thread_invariant(ou):
    drift, cost, rho = ou
    cfg = dict(dt=1e-2, T=5.0, burn_in=1.0, n_paths=64, seed=42)
    a = simulate_meanfield(drift, SimConfig(**cfg), cost, rho)
    b = simulate_meanfield(drift, SimConfig(**cfg), cost, rho)
    c = simulate_meanfield(drift, SimConfig(**cfg, threads=3), cost, rho)
    d = simulate_meanfield(drift, SimConfig(**{**cfg, "seed": 43}), cost, rho)
    assert a.J_hat == b.J_hat == c.J_hat
    assert a.stderr == c.stderr
    np.testing.assert_array_equal(a.probabilities, c.probabilities)
    assert a.J_hat != d.J_hat


def test_cost_independent_of_start(ou):
    drift, cost, rho = ou
    runs = [
        simulate_meanfield(drift, SimConfig(dt=1e-2, T=30.0, burn_in=5.0, n_paths=64, seed=6, x0=x0), cost, rho)
        for x0 in (-2.0, 0.0, 3.0)
    ]
    for a, b in zip(runs, runs[1:]):
        assert abs(a.J_hat - b.J_hat) < 3 * math.hypot(a.stderr, b.stderr)


def test_path_streams_are_independent_of_path_count():
    a = path_generator(9, 5).standard_normal(4)
    b = path_generator(9, 5).standard_normal(4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, path_generator(9, 6).standard_normal(4))


def test_stderr_scaling(ou):
    drift, cost, rho = ou
    base = dict(dt=1e-2, T=6.0, burn_in=1.0, blocks=256, seed=5)
    s1 = simulate_meanfield(drift, SimConfig(n_paths=256, **base), cost, rho).stderr
    s2 = simulate_meanfield(drift, SimConfig(n_paths=512, **base), cost, rho).stderr
    assert s1 / s2 == pytest.approx(math.sqrt(2), rel=0.2)


def test_dt_halving(ou):
    drift, cost, rho = ou
    runs = [
        simulate_meanfield(drift, SimConfig(dt=dt, T=40.0, burn_in=4.0, n_paths=64, seed=8), cost, rho)
        for dt in (1e-2, 5e-3)
    ]
    se = math.hypot(runs[0].stderr, runs[1].stderr)
    assert abs(runs[0].J_hat - runs[1].J_hat) < 3 * se


class TestStationarity:
    def test_direct_sampling(self, harmonic_fine):
        _, st0 = harmonic_fine
        u = np.random.default_rng(0).random(1_000_000)
        stats = stats_from_samples(quantiles(st0.rho0, u), -8.0, 8.0, 256)
        assert stats.n_samples == 1_000_000
        assert stationarity_check(stats, st0.rho0) <= 0.01

    def test_wrong_drift_detected(self, ou):
        drift, _, rho = ou
        half = ScalarField(drift.grid, 0.5 * drift.values)
        cfg = SimConfig(dt=1e-2, T=20.0, burn_in=4.0, n_paths=64, seed=2)
        right = simulate_meanfield(drift, cfg, rho_ref=rho)
        wrong = simulate_meanfield(half, cfg, rho_ref=rho)
        assert right.tv < 0.05
        assert wrong.tv > 0.05
        assert stationarity_check(wrong, rho) == pytest.approx(wrong.tv)

    def test_no_samples(self):
        with pytest.raises(ValueError):
            stats_from_samples([], -1.0, 1.0)

    def test_sample_density(self, harmonic_fine):
        _, st0 = harmonic_fine
        x = sample_density(st0.rho0, 4000, seed=3)
        np.testing.assert_array_equal(x, sample_density(st0.rho0, 4000, seed=3))
        assert np.var(x) == pytest.approx(1 / SQRT2, rel=0.1)


@pytest.fixture(scope="module")
def free_pair():
    pot = MeanFieldPotential.build(UniformGrid.line(-6, 6, 121), HARMONIC)
    st2 = solve_linear_ground_state(pot, 2, warm_start=solve_ground_state(pot))
    return st2


class TestNParticle:
    @pytest.mark.slow
    def test_separable_cost_and_pooled_histogram(self, free_pair):
        cfg = SimConfig(dt=2e-3, T=45.0, burn_in=5.0, n_paths=256, seed=11, thin=10)
        stats = simulate_nparticle(optimal_drift_N(free_pair), cfg, nparticle_cost(free_pair), free_pair.marginal1)
        assert stats.n_samples >= 1_000_000
        assert stats.J_hat == pytest.approx(SQRT2, rel=0.02)
        assert stats.tv <= 0.02

    def test_label_swap(self, interacting):
        st2 = interacting.state(2)
        drifts, cost = optimal_drift_N(st2), nparticle_cost(st2)
        base = dict(dt=1e-2, T=20.0, burn_in=2.0, n_paths=64)
        a = simulate_nparticle(drifts, SimConfig(x0=(0.8, -0.3), seed=1, **base), cost)
        b = simulate_nparticle(drifts, SimConfig(x0=(-0.3, 0.8), seed=2, **base), cost)
        assert abs(a.J_hat - b.J_hat) < 3 * math.hypot(a.stderr, b.stderr)

    def test_drift_count(self, interacting):
        drifts = optimal_drift_N(interacting.state(2))
        with pytest.raises(InvalidGridError):
            simulate_nparticle(drifts[:1], SimConfig(dt=1e-2, T=1.0, burn_in=0.0, n_paths=16))


class TestConfig:
    @pytest.mark.parametrize(
        "kw",
        [
            dict(dt=0.0),
            dict(burn_in=50.0, T=40.0),
            dict(blocks=8),
            dict(n_paths=8),
            dict(initial="uniform"),
            dict(seed=-1),
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SimConfig(**kw)

    def test_dt_limit(self, ou):
        drift, _, _ = ou
        with pytest.raises(ValueError):
            simulate_meanfield(drift, SimConfig(dt=0.5, T=2.0, burn_in=0.0, n_paths=16))

    def test_divergence_reported(self):
        grid = UniformGrid.line(-5, 5, 101)
        x = grid.coords()
        # explosive outward drift near the box edge
        bad = ScalarField(grid, np.where(np.abs(x) > 4, np.sign(x) * 1e200, 0.0))
        cfg = SimConfig(dt=1e-2, T=3.0, burn_in=0.0, n_paths=16, x0=4.5)
        with pytest.raises(InstabilityError):
            simulate_meanfield(bad, cfg)

    def test_density_initial(self, ou):
        drift, cost, rho = ou
        cfg = SimConfig(dt=1e-2, T=2.0, burn_in=0.0, n_paths=64, initial="density", seed=4)
        stats = simulate_meanfield(drift, cfg, cost, rho)
        assert math.isfinite(stats.J_hat)
        with pytest.raises(ValueError):
            simulate_meanfield(drift, cfg, cost)
