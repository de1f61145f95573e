"""
Numerical check of the block-diagonal approximation used for selection.

For random linear-Gaussian chains over a delay window, compare the exact
MSE-reduction trace tr(R_XZ R_ZZ⁻¹ R_ZX) with the version that replaces
R_ZZ by its block diagonal B (one block per sensor and step), and
evaluate the upper bound on their difference as the measurement noise
grows.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from ..core.mat import (
    partition_blocks,
    spectral_radius_bound_blocks,
    spectral_radius_sym,
    spd_solve,
    symmetrize,
)
from ..errors import ConfigError
from ..filters.smoother import measurement_cross_covariance
from ..utils.logger import get_logger

logger = get_logger(__name__)

DEFAULT_SIGMAS = (1.0, 10.0, 100.0, 1000.0)


@dataclass
class LinearChain:
    """
    X_{t+1} = F X_t + w over steps 0…window, sensors measuring steps 0…window−1.

    The last step plays the role of the current step k.
    """

    F: np.ndarray
    V: np.ndarray
    P0: np.ndarray
    H: List[np.ndarray]
    window: int

    def state_covs(self) -> List[np.ndarray]:
        covs = [self.P0]
        for _ in range(self.window):
            covs.append(symmetrize(self.F @ covs[-1] @ self.F.T + self.V))
        return covs

    def transition_product(self, m: int, n: int) -> np.ndarray:
        """F_{m,n} = F^{m−n} for m ≥ n."""
        return np.linalg.matrix_power(self.F, m - n)

    def covariances(self, sigma: float):
        """
        Joint covariances for noise standard deviation sigma.

        Returns:
            (R_ZZ, B, R_XZ, block sizes)
        """
        covs = self.state_covs()
        index = [(m, s) for m in range(self.window) for s in range(len(self.H))]
        sizes = [self.H[s].shape[0] for _, s in index]
        offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        total = int(offsets[-1])
        d = self.F.shape[0]

        R_zz = np.zeros((total, total))
        R_xz = np.zeros((d, total))
        for a, (m, s) in enumerate(index):
            ra = slice(offsets[a], offsets[a + 1])
            R_xz[:, ra] = self.transition_product(self.window, m) @ covs[m] @ self.H[s].T
            for b, (n, j) in enumerate(index):
                if b > a:
                    continue
                rb = slice(offsets[b], offsets[b + 1])
                if m >= n:
                    block = measurement_cross_covariance(self.H[s], self.transition_product(m, n), covs[n], self.H[j])
                else:
                    block = measurement_cross_covariance(self.H[j], self.transition_product(n, m), covs[m], self.H[s]).T
                R_zz[ra, rb] = block
                R_zz[rb, ra] = block.T
        R_zz += sigma ** 2 * np.eye(total)

        B = np.zeros_like(R_zz)
        for a in range(len(index)):
            ra = slice(offsets[a], offsets[a + 1])
            B[ra, ra] = R_zz[ra, ra]
        return symmetrize(R_zz), symmetrize(B), R_xz, sizes


def random_chain(rng: np.random.Generator, state_dim: int = 2, n_sensors: int = 2, window: int = 3,
                 scale: float = 0.01) -> LinearChain:
    """
    Random chain with entrywise-positive F, H and initial covariance.

    scale shrinks the state covariances so that unit measurement noise
    already dominates them.
    """
    F = 0.5 * np.eye(state_dim) + rng.uniform(0.05, 0.2, (state_dim, state_dim))
    F /= max(1.0, spectral_radius_sym(symmetrize(F @ F.T)) ** 0.5)
    M = rng.uniform(0.1, 1.0, (state_dim, state_dim))
    P0 = scale * (M @ M.T + 0.1 * np.eye(state_dim))
    V = 0.1 * scale * np.eye(state_dim)
    H = [rng.uniform(0.2, 1.0, (1, state_dim)) for _ in range(n_sensors)]
    return LinearChain(F, V, P0, H, window)


def trace_terms(R_zz: np.ndarray, B: np.ndarray, R_xz: np.ndarray):
    """(tr R_XZ R_ZZ⁻¹ R_ZX, tr R_XZ B⁻¹ R_ZX)."""
    exact = float(np.trace(R_xz @ spd_solve(R_zz, R_xz.T)))
    blockdiag = float(np.trace(R_xz @ spd_solve(B, R_xz.T)))
    return exact, blockdiag


def difference_bound(R_zz: np.ndarray, B: np.ndarray, R_xz: np.ndarray, sizes: Sequence[int],
                     noise_floor: float) -> Optional[float]:
    """
    Upper bound on |exact − blockdiag|.

    n·ρ(R_XZ R_ZX)·ρ(B−R) / ((λ − ρ(B−R))·λ) with n the total measurement
    dimension, λ the smallest noise eigenvalue and ρ(B−R) bounded blockwise.

    Returns:
        The bound, or None when λ ≤ ρ(B−R)
    """
    rho_diff = spectral_radius_bound_blocks(partition_blocks(B - R_zz, sizes))
    if noise_floor <= rho_diff:
        return None
    rho_cross = spectral_radius_sym(symmetrize(R_xz @ R_xz.T))
    n = int(sum(sizes))
    return n * rho_cross * rho_diff / ((noise_floor - rho_diff) * noise_floor)


def theorem1_study(
        n_systems: int = 20,
        state_dim: int = 2,
        n_sensors: int = 2,
        window: int = 3,
        sigmas: Sequence[float] = DEFAULT_SIGMAS,
        seed: int = 0,
) -> pd.DataFrame:
    """
    Evaluate both trace terms, their difference and the bound over a noise ladder.

    Args:
        n_systems: Random systems to generate
        state_dim: State dimension
        n_sensors: Scalar sensors per step
        window: Delay window ℓ
        sigmas: Measurement noise standard deviations
        seed: Seed for system generation

    Returns:
        Columns system, sigma, exact, blockdiag, abs_diff, bound (NaN where
        the bound does not apply)
    """
    if n_systems < 1 or state_dim < 1 or n_sensors < 1 or window < 1:
        raise ConfigError("Theorem study needs at least one system, state, sensor and delay step")
    if any(s <= 0 for s in sigmas):
        raise ConfigError(f"Noise levels must be positive, got {list(sigmas)}")

    rng = np.random.default_rng(seed)
    rows = []
    for system in range(n_systems):
        chain = random_chain(rng, state_dim, n_sensors, window)
        for sigma in sigmas:
            R_zz, B, R_xz, sizes = chain.covariances(sigma)
            exact, blockdiag = trace_terms(R_zz, B, R_xz)
            bound = difference_bound(R_zz, B, R_xz, sizes, sigma ** 2)
            if bound is None:
                logger.warning(f"System {system}, sigma={sigma:g}: noise too small for the bound to apply")
            rows.append({
                "system": system,
                "sigma": float(sigma),
                "exact": exact,
                "blockdiag": blockdiag,
                "abs_diff": abs(exact - blockdiag),
                "bound": float("nan") if bound is None else bound,
            })
    return pd.DataFrame(rows, columns=["system", "sigma", "exact", "blockdiag", "abs_diff", "bound"])
