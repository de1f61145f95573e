"""Error metrics over Monte-Carlo runs."""

from typing import Dict, Sequence

import numpy as np

from ..errors import DimensionMismatchError


def position_errors(estimates, truth) -> np.ndarray:
    """
    Euclidean position error per run and step.

    Args:
        estimates: (M, T, 2) estimated positions
        truth: (T, 2) true positions

    Returns:
        (M, T) errors in metres
    """
    estimates = np.asarray(estimates, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimates.ndim == 2:
        estimates = estimates[np.newaxis]
    if estimates.ndim != 3 or estimates.shape[1:] != truth.shape or truth.shape[-1] != 2:
        raise DimensionMismatchError(
            f"Estimates {estimates.shape} do not match truth {truth.shape} as (M, T, 2) against (T, 2)"
        )
    return np.linalg.norm(estimates - truth, axis=-1)


def rms_curve(estimates, truth) -> np.ndarray:
    """√((1/M) Σ_i (x̂−x)² + (ŷ−y)²) per step."""
    errors = position_errors(estimates, truth)
    return np.sqrt(np.mean(errors ** 2, axis=0))


def error_quantiles(errors: np.ndarray, quantiles: Sequence[float] = (0.25, 0.5, 0.75)) -> np.ndarray:
    """(len(quantiles), T) quantiles of per-run errors at each step."""
    return np.quantile(np.atleast_2d(errors), quantiles, axis=0)


def proportion_standard_error(p: float, n: int) -> float:
    """Binomial standard error of an empirical proportion."""
    if n <= 0:
        return float("inf")
    return float(np.sqrt(max(p * (1.0 - p), 0.0) / n))


def mean_with_standard_error(values: Sequence[float]) -> Dict[str, float]:
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return {"mean": float(values.mean()) if values.size else float("nan"), "se": float("inf")}
    return {"mean": float(values.mean()), "se": float(values.std(ddof=1) / np.sqrt(values.size))}
