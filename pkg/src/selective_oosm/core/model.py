"""
State-space models: dynamics f_k with Jacobian F_k and process noise V,
and sensors h_k^s with Jacobian H_k^s and measurement noise Q^s.

Concrete models are the nearly coordinated turn with unknown turn rate,
bearing-only sensors, and linear-Gaussian dynamics/sensors used by the
oracle tests.
"""

from abc import ABC, abstractmethod
from functools import cached_property
from typing import Optional, Sequence, Tuple

import numpy as np

from .mat import psd_sqrt, symmetrize
from ..errors import DimensionMismatchError, UndefinedBearingError

# Below this |ω·T| the turn terms switch to their Taylor series
SERIES_THRESHOLD = 1e-6

CT_STATE_DIM = 5


def angle_diff(a, b):
    """(a − b) wrapped to (−π, π]; works elementwise on arrays."""
    d = np.mod(np.asarray(a, dtype=float) - np.asarray(b, dtype=float), 2.0 * np.pi)
    d = np.where(d > np.pi, d - 2.0 * np.pi, d)
    return d if d.ndim else float(d)


def wrap_angle(a):
    """Angle wrapped to (−π, π]."""
    return angle_diff(a, 0.0)


def _turn_terms(theta: np.ndarray):
    """
    sin(θ)/θ, (1 − cos θ)/θ and their θ-derivatives, stable at θ = 0.
    """
    theta = np.asarray(theta, dtype=float)
    small = np.abs(theta) < SERIES_THRESHOLD
    t = np.where(small, 1.0, theta)  # avoids 0/0 in the unused branch
    s, c = np.sin(t), np.cos(t)

    a = np.where(small, 1.0 - theta ** 2 / 6.0 + theta ** 4 / 120.0, s / t)
    b = np.where(small, theta / 2.0 - theta ** 3 / 24.0, (1.0 - c) / t)
    da = np.where(small, -theta / 3.0 + theta ** 3 / 30.0, (t * c - s) / t ** 2)
    db = np.where(small, 0.5 - theta ** 2 / 8.0 + theta ** 4 / 144.0, (t * s - 1.0 + c) / t ** 2)
    return a, b, da, db


def ct_transition(x, sampling_period: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Coordinated-turn map and its Jacobian.

    State is [pˣ, pʸ, vˣ, vʸ, ω]. Positive ω turns counter-clockwise.

    Args:
        x: State vector of length 5
        sampling_period: Step length T in seconds

    Returns:
        (f(x), F(x)) where F includes the ∂/∂ω column
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (CT_STATE_DIM,):
        raise DimensionMismatchError(f"Coordinated-turn state must have length 5, got {x.shape}")
    return ct_map(x, sampling_period), ct_jacobian(x, sampling_period)


def ct_map(x, sampling_period: float = 1.0) -> np.ndarray:
    """Coordinated-turn map applied along the last axis of x."""
    x = np.asarray(x, dtype=float)
    T = sampling_period
    px, py, vx, vy, w = (x[..., i] for i in range(CT_STATE_DIM))
    theta = w * T
    a, b, _, _ = _turn_terms(theta)
    s, c = np.sin(theta), np.cos(theta)

    out = np.empty_like(x)
    out[..., 0] = px + T * (a * vx - b * vy)
    out[..., 1] = py + T * (b * vx + a * vy)
    out[..., 2] = c * vx - s * vy
    out[..., 3] = s * vx + c * vy
    out[..., 4] = w
    return out


def ct_jacobian(x, sampling_period: float = 1.0) -> np.ndarray:
    """Jacobian of ct_map at a single state."""
    px, py, vx, vy, w = np.asarray(x, dtype=float)
    T = sampling_period
    theta = w * T
    a, b, da, db = (float(v) for v in _turn_terms(theta))
    s, c = np.sin(theta), np.cos(theta)

    F = np.eye(CT_STATE_DIM)
    F[0, 2] = T * a
    F[0, 3] = -T * b
    F[0, 4] = T * T * (da * vx - db * vy)
    F[1, 2] = T * b
    F[1, 3] = T * a
    F[1, 4] = T * T * (db * vx + da * vy)
    F[2, 2] = c
    F[2, 3] = -s
    F[2, 4] = T * (-s * vx - c * vy)
    F[3, 2] = s
    F[3, 3] = c
    F[3, 4] = T * (c * vx - s * vy)
    return F


class StateModel(ABC):
    """
    Markov dynamics X_k = f(X_{k-1}) + ϑ_k with ϑ_k ~ N(0, V).
    """

    def __init__(self, process_noise):
        V = symmetrize(np.atleast_2d(np.asarray(process_noise, dtype=float)))
        if V.shape != (self.state_dim, self.state_dim):
            raise DimensionMismatchError(
                f"Process noise must be {self.state_dim}x{self.state_dim}, got {V.shape}"
            )
        self.process_noise = V

    @property
    @abstractmethod
    def state_dim(self) -> int:
        ...

    @abstractmethod
    def transition(self, x) -> np.ndarray:
        """f applied along the last axis (vectorized over particles)."""

    @abstractmethod
    def jacobian(self, x) -> np.ndarray:
        """F evaluated at a single state."""

    @cached_property
    def noise_factor(self) -> np.ndarray:
        return psd_sqrt(self.process_noise)

    def propagate(self, particles: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Push particles through f and add process-noise draws."""
        noise = rng.standard_normal(particles.shape) @ self.noise_factor.T
        return self.transition(particles) + noise


class CoordinatedTurnModel(StateModel):
    """Nearly coordinated turn with Cartesian velocity and unknown constant turn rate."""

    def __init__(self, process_noise, sampling_period: float = 1.0):
        self.sampling_period = float(sampling_period)
        super().__init__(process_noise)

    @property
    def state_dim(self) -> int:
        return CT_STATE_DIM

    def transition(self, x) -> np.ndarray:
        return ct_map(x, self.sampling_period)

    def jacobian(self, x) -> np.ndarray:
        return ct_jacobian(x, self.sampling_period)


class LinearGaussianModel(StateModel):
    """X_k = A X_{k-1} + ϑ_k."""

    def __init__(self, transition_matrix, process_noise):
        self.transition_matrix = np.atleast_2d(np.asarray(transition_matrix, dtype=float))
        super().__init__(process_noise)

    @property
    def state_dim(self) -> int:
        return self.transition_matrix.shape[0]

    def transition(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.transition_matrix.T

    def jacobian(self, x) -> np.ndarray:
        return self.transition_matrix.copy()


class SensorModel(ABC):
    """
    Measurement Y^s = h^s(X) + ζ^s with ζ^s ~ N(0, Q^s).

    Angular sensors compare measurements through angle_diff.
    """

    angular = False
    position: Optional[Tuple[float, float]] = None

    def __init__(self, sensor_id: int, noise_cov):
        self.sensor_id = int(sensor_id)
        Q = symmetrize(np.atleast_2d(np.asarray(noise_cov, dtype=float)))
        self.noise_cov = Q

    @property
    def meas_dim(self) -> int:
        return self.noise_cov.shape[0]

    @abstractmethod
    def measure(self, x) -> np.ndarray:
        """h applied along the last axis; output has a trailing meas_dim axis."""

    @abstractmethod
    def jacobian(self, x) -> np.ndarray:
        """H evaluated at a single state, shape (meas_dim, state_dim)."""

    def residual(self, z, predicted) -> np.ndarray:
        """Innovation z − h, wrapped for angular sensors."""
        if self.angular:
            return np.asarray(angle_diff(z, predicted))
        return np.asarray(z, dtype=float) - np.asarray(predicted, dtype=float)

    @cached_property
    def noise_factor(self) -> np.ndarray:
        return psd_sqrt(self.noise_cov)

    def sample(self, x, rng: np.random.Generator) -> np.ndarray:
        """Noisy measurement of a single true state."""
        z = self.measure(x) + self.noise_factor @ rng.standard_normal(self.meas_dim)
        return np.asarray(wrap_angle(z)) if self.angular else z


class BearingSensor(SensorModel):
    """Bearing-only sensor at a fixed position, four-quadrant arctangent."""

    angular = True

    def __init__(self, sensor_id: int, position: Sequence[float], sigma: float, state_dim: int = CT_STATE_DIM):
        super().__init__(sensor_id, [[float(sigma) ** 2]])
        self.position = (float(position[0]), float(position[1]))
        self.sigma = float(sigma)
        self.state_dim = int(state_dim)

    def _offsets(self, x):
        x = np.asarray(x, dtype=float)
        return x[..., 0] - self.position[0], x[..., 1] - self.position[1]

    def measure(self, x) -> np.ndarray:
        dx, dy = self._offsets(x)
        return np.arctan2(dy, dx)[..., np.newaxis]

    def jacobian(self, x) -> np.ndarray:
        dx, dy = self._offsets(x)
        r2 = float(dx * dx + dy * dy)
        if r2 == 0.0:
            raise UndefinedBearingError(f"Target coincides with sensor {self.sensor_id} at {self.position}")
        H = np.zeros((1, self.state_dim))
        H[0, 0] = -dy / r2
        H[0, 1] = dx / r2
        return H


def bearing_measure(x, sensor: BearingSensor) -> Tuple[float, np.ndarray]:
    """
    Bearing of a target from a sensor and its Jacobian.

    Returns:
        (bearing in (−π, π], H of shape (1, state_dim))

    Raises:
        UndefinedBearingError: If the target sits on the sensor
    """
    H = sensor.jacobian(x)
    return float(wrap_angle(sensor.measure(x)[0])), H


class LinearSensor(SensorModel):
    """Y = C X + ζ."""

    def __init__(self, sensor_id: int, matrix, noise_cov):
        super().__init__(sensor_id, noise_cov)
        self.matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        if self.matrix.shape[0] != self.meas_dim:
            raise DimensionMismatchError(
                f"Sensor matrix has {self.matrix.shape[0]} rows but noise is {self.meas_dim}-dimensional"
            )

    def measure(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.matrix.T

    def jacobian(self, x) -> np.ndarray:
        return self.matrix.copy()
