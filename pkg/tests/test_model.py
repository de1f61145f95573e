"""
Tests for the coordinated-turn model and bearing sensors.
"""

import sys
from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_allclose

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from selective_oosm.core.model import (
    BearingSensor,
    CoordinatedTurnModel,
    LinearGaussianModel,
    LinearSensor,
    angle_diff,
    bearing_measure,
    ct_map,
    ct_transition,
)
from selective_oosm.errors import DimensionMismatchError, UndefinedBearingError

FD_STEP = 1e-6


def finite_difference(func, x):
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = FD_STEP
        cols.append((np.atleast_1d(func(x + e)) - np.atleast_1d(func(x - e))) / (2 * FD_STEP))
    return np.column_stack(cols)


def random_states(rng, n=100):
    return np.column_stack([
        rng.uniform(-1000, 1000, n),
        rng.uniform(-1000, 1000, n),
        rng.uniform(-60, 60, n),
        rng.uniform(-60, 60, n),
        rng.uniform(-0.5, 0.5, n),
    ])


class TestCoordinatedTurn:

    def test_constant_velocity_limit(self):
        f, _ = ct_transition([0.0, 0.0, 1.0, 0.0, 0.0])
        assert_allclose(f, [1.0, 0.0, 1.0, 0.0, 0.0], atol=1e-15)

    def test_quarter_turn(self):
        f, _ = ct_transition([0.0, 0.0, 1.0, 0.0, np.pi / 2])
        assert_allclose(f, [2 / np.pi, 2 / np.pi, 0.0, 1.0, np.pi / 2], atol=1e-12)

    def test_continuous_at_zero_rate(self):
        x = np.array([10.0, -20.0, 30.0, 5.0, 0.0])
        near = x.copy()
        near[4] = 1e-12
        assert np.max(np.abs(ct_map(near) - ct_map(x))) < 1e-9

    def test_jacobian_matches_finite_differences(self):
        rng = np.random.default_rng(10)
        for x in random_states(rng):
            _, F = ct_transition(x)
            assert_allclose(F, finite_difference(ct_map, x), rtol=1e-4, atol=1e-5)

    def test_jacobian_near_zero_rate(self):
        x = np.array([100.0, 50.0, 20.0, -30.0, 1e-8])
        _, F = ct_transition(x)
        assert_allclose(F, finite_difference(ct_map, x), rtol=1e-4, atol=1e-5)

    def test_wrong_dimension(self):
        with pytest.raises(DimensionMismatchError):
            ct_transition(np.zeros(4))

    def test_vectorized_propagation(self):
        model = CoordinatedTurnModel(np.diag([1.0, 1.0, 0.1, 0.1, 1e-4]))
        rng = np.random.default_rng(11)
        particles = random_states(rng, 50)
        out = model.propagate(particles, np.random.default_rng(0))
        assert out.shape == particles.shape
        assert_allclose(model.transition(particles)[7], ct_map(particles[7]))

    def test_process_noise_shape_checked(self):
        with pytest.raises(DimensionMismatchError):
            CoordinatedTurnModel(np.eye(4))


class TestBearing:

    def test_hand_value(self):
        sensor = BearingSensor(1, (-200.0, 0.0), 0.05)
        z, H = bearing_measure([0.0, 100.0, 0.0, 0.0, 0.0], sensor)
        assert z == pytest.approx(np.arctan(0.5), abs=1e-12)
        assert H.shape == (1, 5)
        assert_allclose(H[0, 2:], 0.0)

    def test_due_east(self):
        sensor = BearingSensor(2, (200.0, 0.0), 0.05)
        z, _ = bearing_measure([500.0, 0.0, 0.0, 0.0, 0.0], sensor)
        assert z == 0.0

    def test_due_west_is_pi(self):
        sensor = BearingSensor(2, (200.0, 0.0), 0.05)
        z, _ = bearing_measure([-500.0, 0.0, 0.0, 0.0, 0.0], sensor)
        assert z == pytest.approx(np.pi)

    def test_jacobian_matches_finite_differences(self):
        rng = np.random.default_rng(12)
        sensor = BearingSensor(3, (-750.0, 750.0), 0.05)
        for x in random_states(rng):
            H = sensor.jacobian(x)
            fd = finite_difference(lambda y: sensor.measure(y), x)
            assert_allclose(H, fd, rtol=1e-4, atol=1e-8)

    def test_outputs_in_range(self):
        rng = np.random.default_rng(13)
        sensor = BearingSensor(1, (0.0, 0.0), 0.05)
        z = sensor.measure(random_states(rng, 1000))
        assert np.all(z > -np.pi) and np.all(z <= np.pi)

    def test_coincident_target(self):
        sensor = BearingSensor(1, (-200.0, 0.0), 0.05)
        with pytest.raises(UndefinedBearingError):
            bearing_measure([-200.0, 0.0, 1.0, 1.0, 0.0], sensor)

    def test_wrapped_residual(self):
        sensor = BearingSensor(1, (0.0, 0.0), 0.05)
        assert sensor.residual(np.array([np.pi - 0.01]), np.array([-np.pi + 0.01]))[0] == pytest.approx(-0.02)


class TestAngleDiff:

    def test_simple(self):
        assert angle_diff(0.1, -0.1) == pytest.approx(0.2)

    def test_wraparound(self):
        assert angle_diff(np.pi - 0.01, -np.pi + 0.01) == pytest.approx(-0.02)

    def test_self_difference(self):
        for x in np.linspace(-10, 10, 21):
            assert angle_diff(x, x) == 0.0

    def test_range(self):
        d = angle_diff(np.linspace(-20, 20, 1001), 0.0)
        assert np.all(d > -np.pi) and np.all(d <= np.pi)


class TestLinearModels:

    def test_linear_model(self):
        model = LinearGaussianModel([[1.0, 1.0], [0.0, 1.0]], np.eye(2))
        assert_allclose(model.transition(np.array([1.0, 2.0])), [3.0, 2.0])
        assert_allclose(model.jacobian(None), [[1.0, 1.0], [0.0, 1.0]])

    def test_linear_sensor_rows_checked(self):
        with pytest.raises(DimensionMismatchError):
            LinearSensor(1, [[1.0, 0.0], [0.0, 1.0]], [[1.0]])
