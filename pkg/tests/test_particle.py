"""
Tests for the SIR particle filter core.
"""

import sys
from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from selective_oosm.core.model import LinearGaussianModel, LinearSensor
from selective_oosm.errors import DimensionMismatchError
from selective_oosm.filters.particle import (
    GaussianSummary,
    ParticleSet,
    effective_sample_size,
    initialize,
    normalize_log_weights,
    resample,
    reweight,
    sample_gaussian,
    save_gauss,
    sir_step,
    systematic_resample,
)


@pytest.fixture
def scalar_model():
    return LinearGaussianModel([[1.0]], [[1.0]])


@pytest.fixture
def scalar_sensor():
    return LinearSensor(1, [[1.0]], [[1.0]])


class TestSirStep:

    def test_no_measurements_gives_uniform_weights(self, scalar_model):
        rng = np.random.default_rng(0)
        ps = ParticleSet(np.arange(10.0)[:, None], np.arange(1.0, 11.0) / 55.0)
        out = sir_step(ps, [], scalar_model, rng)
        assert out.size == 10
        assert_allclose(out.weights, np.full(10, 0.1))

    def test_matches_kalman_update(self, scalar_model, scalar_sensor):
        rng = np.random.default_rng(1)
        n = 100_000
        ps = initialize(GaussianSummary([0.0], [[1.0]]), n, rng)
        out = sir_step(ps, [(scalar_sensor, np.array([1.0]))], scalar_model, rng)

        # Prediction variance 2, gain 2/3
        kalman_mean, kalman_var = 2.0 / 3.0, 2.0 / 3.0
        g = save_gauss(out)
        se = np.sqrt(kalman_var / n)
        assert abs(g.mean[0] - kalman_mean) < 3 * np.sqrt(2) * se
        assert g.cov[0, 0] == pytest.approx(kalman_var, rel=0.03)

    def test_weights_normalized(self, scalar_model, scalar_sensor):
        rng = np.random.default_rng(2)
        ps = initialize(GaussianSummary([0.0], [[4.0]]), 500, rng)
        weighted = reweight(ps, np.random.default_rng(3).normal(size=500))
        assert weighted.weights.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(weighted.weights >= 0)

    def test_distant_measurement_does_not_underflow(self, scalar_model):
        rng = np.random.default_rng(4)
        sharp = LinearSensor(1, [[1.0]], [[1e-6]])
        ps = initialize(GaussianSummary([0.0], [[1.0]]), 1000, rng)
        out = sir_step(ps, [(sharp, np.array([50.0]))], scalar_model, rng)
        assert not out.underflow
        assert out.weights.sum() == pytest.approx(1.0)

    def test_deterministic_given_seed(self, scalar_model, scalar_sensor):
        def trajectory(seed):
            rng = np.random.default_rng(seed)
            ps = initialize(GaussianSummary([0.0], [[1.0]]), 200, rng)
            means = []
            for z in (0.5, 1.0, -0.3):
                ps = sir_step(ps, [(scalar_sensor, np.array([z]))], scalar_model, rng)
                means.append(save_gauss(ps).mean[0])
            return means

        assert trajectory(7) == trajectory(7)


class TestWeights:

    def test_underflow_resets_to_uniform(self):
        weights, underflow = normalize_log_weights(np.full(5, -np.inf))
        assert underflow
        assert_allclose(weights, np.full(5, 0.2))

    def test_max_subtraction(self):
        weights, underflow = normalize_log_weights(np.array([-1e5, -1e5 - np.log(3.0)]))
        assert not underflow
        assert_allclose(weights, [0.75, 0.25])

    def test_mismatched_lengths(self):
        with pytest.raises(DimensionMismatchError):
            ParticleSet(np.zeros((3, 1)), np.ones(2) / 2)


class TestResampling:

    def test_one_hot_copies_single_particle(self):
        rng = np.random.default_rng(5)
        particles = np.arange(6.0)[:, None]
        weights = np.zeros(6)
        weights[4] = 1.0
        out = resample(ParticleSet(particles, weights), rng)
        assert_array_equal(out.particles, np.full((6, 1), 4.0))
        assert_allclose(out.weights, np.full(6, 1 / 6))

    def test_indices_sorted_and_in_range(self):
        rng = np.random.default_rng(6)
        w = rng.dirichlet(np.ones(50))
        idx = systematic_resample(w, rng)
        assert idx.shape == (50,)
        assert np.all(np.diff(idx) >= 0)
        assert idx.min() >= 0 and idx.max() < 50

    def test_preserves_weighted_mean(self):
        rng = np.random.default_rng(7)
        particles = rng.normal(size=(300, 1))
        weights = rng.dirichlet(np.ones(300))
        target = weights @ particles[:, 0]
        means = [particles[systematic_resample(weights, rng), 0].mean() for _ in range(200)]
        se = np.std(means, ddof=1) / np.sqrt(len(means))
        assert abs(np.mean(means) - target) < 4 * se + 1e-12


class TestEss:

    def test_uniform(self):
        assert effective_sample_size(np.full(2000, 1 / 2000)) == pytest.approx(2000.0)

    def test_one_hot(self):
        assert effective_sample_size(np.array([0.0, 1.0, 0.0])) == pytest.approx(1.0)

    def test_hand_value(self):
        assert effective_sample_size(np.array([0.5, 0.25, 0.25])) == pytest.approx(8 / 3)

    def test_particle_set(self):
        ps = ParticleSet.uniform(np.zeros((40, 2)))
        assert effective_sample_size(ps) == pytest.approx(40.0)


class TestGaussianSummaries:

    def test_identical_particles(self):
        g = save_gauss(ParticleSet.uniform(np.tile([1.0, -2.0], (10, 1))))
        assert_allclose(g.mean, [1.0, -2.0])
        assert_allclose(g.cov, np.zeros((2, 2)), atol=1e-15)

    def test_two_particles(self):
        g = save_gauss(ParticleSet.uniform(np.array([[-1.0], [1.0]])))
        assert_allclose(g.mean, [0.0])
        assert_allclose(g.cov, [[1.0]])

    def test_standard_normal_draws(self):
        rng = np.random.default_rng(8)
        g = save_gauss(ParticleSet.uniform(rng.standard_normal((100_000, 1))))
        assert abs(g.mean[0]) < 0.02
        assert abs(g.cov[0, 0] - 1.0) < 0.05

    def test_covariance_symmetric(self):
        rng = np.random.default_rng(9)
        ps = ParticleSet(rng.normal(size=(100, 3)), rng.dirichlet(np.ones(100)))
        cov = save_gauss(ps).cov
        assert_array_equal(cov, cov.T)

    def test_sample_zero_covariance(self):
        ps = sample_gaussian(GaussianSummary([3.0, 4.0], np.zeros((2, 2))), 25, np.random.default_rng(0))
        assert_allclose(ps.particles, np.tile([3.0, 4.0], (25, 1)))

    def test_sample_round_trip(self):
        rng = np.random.default_rng(10)
        g = GaussianSummary([1.0, -1.0], [[2.0, 0.6], [0.6, 1.0]])
        back = save_gauss(sample_gaussian(g, 100_000, rng))
        assert_allclose(back.mean, g.mean, atol=0.03)
        assert_allclose(back.cov, g.cov, atol=0.05)

    def test_single_sample(self):
        ps = sample_gaussian(GaussianSummary([0.0], [[1.0]]), 1, np.random.default_rng(0))
        assert ps.size == 1
        assert ps.weights[0] == 1.0
