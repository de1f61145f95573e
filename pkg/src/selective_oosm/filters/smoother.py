"""
Extended Kalman smoothing over the stored window.

A single RTS backward sweep from the current filtering summary produces
smoothed means and covariances for every step in [k−ℓ, k], together with
the transition products F_{k,τ} and the smoothing cross-covariances
cov(X_τ, X_k) that the selection and reweighting code needs.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy import linalg

from ..core.mat import multiply, spd_solve, symmetrize
from ..core.model import SensorModel, StateModel
from ..errors import WindowError
from ..utils.logger import get_logger
from .particle import GaussianSummary
from .window import WindowStore

logger = get_logger(__name__)


@dataclass
class SmoothedWindow:
    """
    Result of one RTS sweep.

    transition_jacobians[τ] is F evaluated at the filtered mean μ_τ, i.e.
    the Jacobian of the transition τ → τ+1. products[τ] is F_{k,τ} with
    F_{k,k} = I.
    """

    steps: List[int]
    current: GaussianSummary
    means: Dict[int, np.ndarray]
    covs: Dict[int, np.ndarray]
    transition_jacobians: Dict[int, np.ndarray]
    products: Dict[int, np.ndarray]
    gains: Dict[int, np.ndarray]
    cross_covs: Dict[int, np.ndarray]
    sensors: Dict[int, SensorModel] = field(repr=False)
    meas_jacobians: Dict[Tuple[int, int], np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def current_step(self) -> int:
        return self.steps[-1]

    def _check(self, tau: int):
        if tau not in self.means:
            raise WindowError(f"Step {tau} was not smoothed (window {self.steps[0]}..{self.steps[-1]})")

    def smoothed(self, tau: int) -> GaussianSummary:
        self._check(tau)
        return GaussianSummary(self.means[tau], self.covs[tau])

    def H(self, tau: int, sensor_id: int) -> np.ndarray:
        """Measurement Jacobian at the smoothed mean, evaluated on first use."""
        self._check(tau)
        key = (tau, int(sensor_id))
        if key not in self.meas_jacobians:
            self.meas_jacobians[key] = self.sensors[int(sensor_id)].jacobian(self.means[tau])
        return self.meas_jacobians[key]

    def stacked_H(self, tau: int, sensor_ids: Sequence[int]) -> np.ndarray:
        return np.vstack([self.H(tau, sid) for sid in sensor_ids])

    def stacked_noise(self, sensor_ids: Sequence[int]) -> np.ndarray:
        return linalg.block_diag(*[self.sensors[int(sid)].noise_cov for sid in sensor_ids])


def rts_smooth(window: WindowStore, model: StateModel, sensors: Dict[int, SensorModel]) -> SmoothedWindow:
    """
    Backward RTS recursion over the window.

    Args:
        window: Store holding filtering summaries for [k−ℓ, k]
        model: Dynamics providing f, F and V
        sensors: Sensors by id, for measurement Jacobians

    Returns:
        SmoothedWindow initialised at (μ_k, R_k)

    Raises:
        NotPositiveDefiniteError: If a predicted covariance cannot be factored
    """
    steps = window.smoothing_steps()
    k = steps[-1]
    current = window.summary(k)
    d = current.mean.shape[0]
    V = model.process_noise

    means = {k: current.mean}
    covs = {k: current.cov}
    products = {k: np.eye(d)}
    gains: Dict[int, np.ndarray] = {}
    cross = {k: current.cov}
    jacobians: Dict[int, np.ndarray] = {}
    gain_product = np.eye(d)

    for tau in reversed(steps[:-1]):
        filtered = window.summary(tau)
        mu, P = filtered.mean, filtered.cov
        F = model.jacobian(mu)
        predicted = symmetrize(multiply(multiply(F, P), F.T) + V)
        # K = P Fᵀ P_pred⁻¹, obtained from the symmetric solve P_pred Kᵀ = F P
        K = spd_solve(predicted, multiply(F, P)).T

        means[tau] = mu + K @ (means[tau + 1] - model.transition(mu))
        covs[tau] = symmetrize(P + multiply(multiply(K, covs[tau + 1] - predicted), K.T))
        jacobians[tau] = F
        products[tau] = multiply(products[tau + 1], F)
        gains[tau] = K
        gain_product = multiply(K, gain_product)
        cross[tau] = multiply(gain_product, current.cov)

    ordered = sorted(means)
    logger.debug(f"Smoothed steps {ordered[0]}..{ordered[-1]}")
    return SmoothedWindow(
        steps=ordered,
        current=current,
        means=means,
        covs=covs,
        transition_jacobians=jacobians,
        products=products,
        gains=gains,
        cross_covs=cross,
        sensors=dict(sensors),
    )


def meas_covariance(sw: SmoothedWindow, tau: int, sensor_ids) -> np.ndarray:
    """
    R_YY = H R̃_τ Hᵀ + Q for one sensor or a stacked sensor combination.
    """
    sensor_ids = _as_ids(sensor_ids)
    H = sw.stacked_H(tau, sensor_ids)
    return symmetrize(H @ sw.covs[tau] @ H.T + sw.stacked_noise(sensor_ids))


def cross_covariance(sw: SmoothedWindow, tau: int, sensor_ids) -> np.ndarray:
    """R_{X_k Y} = F_{k,τ} R̃_τ Hᵀ, shape (state_dim, meas_dim)."""
    sensor_ids = _as_ids(sensor_ids)
    H = sw.stacked_H(tau, sensor_ids)
    return sw.products[tau] @ sw.covs[tau] @ H.T


def conditional_cross_covariance(sw: SmoothedWindow, tau: int, sensor_ids) -> np.ndarray:
    """
    cov(X_k, Y_τ | W̃) = C_τᵀ Hᵀ, shape (state_dim, meas_dim).

    Unlike the propagated form it accounts for the measurements already
    processed between τ and k, so it shrinks as τ moves away from k.
    Both forms agree at τ = k.
    """
    sensor_ids = _as_ids(sensor_ids)
    H = sw.stacked_H(tau, sensor_ids)
    return sw.cross_covs[tau].T @ H.T


CROSS_COVARIANCE_FORMS = {
    "conditional": conditional_cross_covariance,
    "propagated": cross_covariance,
}


def measurement_cross_covariance(H_m: np.ndarray, F_mn: np.ndarray, P_n: np.ndarray, H_n: np.ndarray) -> np.ndarray:
    """cov(Y_m, Y_n) = H_m F_{m,n} P_n H_nᵀ for m ≥ n under the linearised model."""
    return H_m @ F_mn @ P_n @ H_n.T


def _as_ids(sensor_ids) -> List[int]:
    if np.isscalar(sensor_ids):
        return [int(sensor_ids)]
    return [int(s) for s in sensor_ids]
