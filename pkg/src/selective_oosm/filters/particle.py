"""
SIR particle filter core: propagation, likelihood weighting, systematic
resampling, effective sample size and Gaussian summaries.

Weights are accumulated in the log domain and exponentiated after
subtracting the maximum, since products of bearing likelihoods underflow.
"""

from dataclasses import dataclass, field
from typing import Iterable, Sequence, Tuple

import numpy as np
from scipy import stats

from ..core.mat import psd_sqrt, symmetrize
from ..core.model import SensorModel, StateModel
from ..errors import DimensionMismatchError
from ..utils.logger import get_logger

logger = get_logger(__name__)

Measurement = Tuple[SensorModel, np.ndarray]


@dataclass
class ParticleSet:
    """
    Weighted samples representing the filtering posterior.

    Attributes:
        particles: (N, d) particle locations ξ
        weights: (N,) normalized weights ω
        underflow: True if the last weighting underflowed and was reset to uniform
    """

    particles: np.ndarray
    weights: np.ndarray
    underflow: bool = False

    def __post_init__(self):
        self.particles = np.atleast_2d(np.asarray(self.particles, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if self.particles.shape[0] != self.weights.shape[0]:
            raise DimensionMismatchError(
                f"{self.particles.shape[0]} particles but {self.weights.shape[0]} weights"
            )
        if self.particles.shape[0] < 1:
            raise DimensionMismatchError("A particle set needs at least one particle")

    @classmethod
    def uniform(cls, particles) -> "ParticleSet":
        particles = np.atleast_2d(np.asarray(particles, dtype=float))
        n = particles.shape[0]
        return cls(particles, np.full(n, 1.0 / n))

    @property
    def size(self) -> int:
        return self.particles.shape[0]

    @property
    def dim(self) -> int:
        return self.particles.shape[1]

    def copy(self) -> "ParticleSet":
        return ParticleSet(self.particles.copy(), self.weights.copy(), self.underflow)


@dataclass(frozen=True)
class GaussianSummary:
    """Mean μ and covariance R of a particle set or smoothed state."""

    mean: np.ndarray
    cov: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float).reshape(-1))
        object.__setattr__(self, "cov", symmetrize(np.atleast_2d(np.asarray(self.cov, dtype=float))))
        d = self.mean.shape[0]
        if self.cov.shape != (d, d):
            raise DimensionMismatchError(f"Mean of length {d} with covariance {self.cov.shape}")


def normalize_log_weights(log_weights: np.ndarray) -> Tuple[np.ndarray, bool]:
    """
    Exponentiate and normalize log weights after max-subtraction.

    Returns:
        (weights, underflow) where underflow means no particle kept a
        finite positive weight and the weights were reset to uniform
    """
    log_weights = np.asarray(log_weights, dtype=float)
    finite = np.isfinite(log_weights)
    if not np.any(finite):
        n = log_weights.shape[0]
        logger.warning(f"All {n} particle weights underflowed; resetting to uniform")
        return np.full(n, 1.0 / n), True

    shifted = np.where(finite, log_weights - np.max(log_weights[finite]), -np.inf)
    w = np.exp(shifted)
    total = w.sum()
    if not np.isfinite(total) or total <= 0.0:
        n = log_weights.shape[0]
        logger.warning(f"Particle weights summed to {total}; resetting to uniform")
        return np.full(n, 1.0 / n), True
    return w / total, False


def measurement_log_likelihood(particles: np.ndarray, measurements: Iterable[Measurement]) -> np.ndarray:
    """
    Σ_s log N(y_s − h_s(ξ); 0, Q_s) per particle, with wrapped innovations
    for angular sensors.
    """
    particles = np.atleast_2d(particles)
    total = np.zeros(particles.shape[0])
    for sensor, value in measurements:
        innovation = sensor.residual(np.asarray(value, dtype=float), sensor.measure(particles))
        density = stats.multivariate_normal(mean=np.zeros(sensor.meas_dim), cov=sensor.noise_cov)
        total += np.atleast_1d(density.logpdf(innovation)).reshape(-1)
    return total


def reweight(ps: ParticleSet, log_likelihoods: np.ndarray) -> ParticleSet:
    """Multiply weights by exp(log_likelihoods) and renormalize; locations untouched."""
    with np.errstate(divide="ignore"):
        log_prior = np.log(ps.weights)
    weights, underflow = normalize_log_weights(log_prior + log_likelihoods)
    return ParticleSet(ps.particles, weights, underflow)


def systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """
    Systematic resampling: one uniform offset, N evenly spaced pointers.

    Returns:
        Indices of the selected particles
    """
    n = weights.shape[0]
    positions = (rng.random() + np.arange(n)) / n
    cumulative = np.cumsum(weights)
    cumulative[-1] = 1.0
    return np.minimum(np.searchsorted(cumulative, positions, side="right"), n - 1)


def resample(ps: ParticleSet, rng: np.random.Generator) -> ParticleSet:
    idx = systematic_resample(ps.weights, rng)
    out = ParticleSet.uniform(ps.particles[idx])
    out.underflow = ps.underflow
    return out


def sir_step(
        ps: ParticleSet,
        measurements: Sequence[Measurement],
        model: StateModel,
        rng: np.random.Generator,
) -> ParticleSet:
    """
    One SIR step with the prior as importance function.

    Propagates through f with process noise, weights by the likelihood of
    every measurement time-stamped at this step, normalizes and resamples.

    Args:
        ps: Particle set at the previous step
        measurements: (sensor, value) pairs for this step, possibly empty
        model: Dynamics
        rng: Random generator

    Returns:
        Resampled particle set (uniform weights); underflow is flagged
    """
    propagated = ParticleSet(model.propagate(ps.particles, rng), ps.weights)
    if measurements:
        propagated = reweight(propagated, measurement_log_likelihood(propagated.particles, measurements))
    return resample(propagated, rng)


def effective_sample_size(ps) -> float:
    """1 / Σ ω_i² for a particle set or a normalized weight vector."""
    weights = ps.weights if isinstance(ps, ParticleSet) else np.asarray(ps, dtype=float)
    return float(1.0 / np.sum(weights ** 2))


def save_gauss(ps: ParticleSet) -> GaussianSummary:
    """Weighted mean and covariance of a particle set."""
    mean = ps.weights @ ps.particles
    diff = ps.particles - mean
    cov = (diff * ps.weights[:, np.newaxis]).T @ diff
    return GaussianSummary(mean, cov)


def sample_gaussian(g: GaussianSummary, n: int, rng: np.random.Generator) -> ParticleSet:
    """n equally weighted draws from N(g.mean, g.cov) using the symmetric square root."""
    factor = psd_sqrt(g.cov)
    draws = g.mean + rng.standard_normal((int(n), g.mean.shape[0])) @ factor.T
    return ParticleSet.uniform(draws)


def initialize(prior: GaussianSummary, n: int, rng: np.random.Generator) -> ParticleSet:
    """Initial particle cloud drawn from the filter prior."""
    ps = sample_gaussian(prior, n, rng)
    logger.debug(f"Initialized {n} particles around {np.round(prior.mean, 3)}")
    return ps
