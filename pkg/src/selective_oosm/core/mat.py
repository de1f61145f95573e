"""
Small dense matrix algebra for filtering-sized problems.

Matrices and vectors are float64 numpy arrays. Covariances are
re-symmetrized after every update, and SPD solves go through a Cholesky
factorization with a single jitter retry.
"""

from typing import Iterable, List, Sequence, Tuple

import numpy as np
from scipy import linalg

from ..errors import DimensionMismatchError, NotPositiveDefiniteError, NotSymmetricError
from ..utils.logger import get_logger

logger = get_logger(__name__)

SYMMETRY_TOL = 1e-8
JITTER_SCALE = 1e-9

Block = Tuple[np.ndarray, Tuple[int, int]]


def _as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise DimensionMismatchError(f"Expected a 2-D matrix, got shape {a.shape}")
    return a


def multiply(a, b) -> np.ndarray:
    """
    Matrix product with an explicit shape check.

    Raises:
        DimensionMismatchError: If a.cols != b.rows
    """
    a = _as_matrix(a)
    b = _as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise DimensionMismatchError(f"Cannot multiply {a.shape} by {b.shape}")
    return a @ b


def symmetrize(a) -> np.ndarray:
    """Return (a + aᵀ) / 2, stacked over any leading axes."""
    a = np.asarray(a, dtype=float)
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def is_symmetric(a, tol: float = SYMMETRY_TOL) -> bool:
    a = _as_matrix(a)
    if a.shape[0] != a.shape[1]:
        return False
    scale = max(1.0, float(np.max(np.abs(a))) if a.size else 1.0)
    return bool(np.max(np.abs(a - a.T), initial=0.0) <= tol * scale)


def jitter_for(a: np.ndarray) -> float:
    """Diagonal loading used on the single factorization retry."""
    n = a.shape[0]
    return JITTER_SCALE * float(np.trace(a)) / n


def cholesky_factor(a) -> Tuple[np.ndarray, bool]:
    """
    Lower Cholesky factor of a symmetric positive definite matrix.

    Tries the symmetrized matrix first; on failure adds
    1e-9 * trace(a) / n on the diagonal once and retries.

    Returns:
        (factor in scipy cho_factor form, lower flag)

    Raises:
        NotPositiveDefiniteError: If the retry also fails
    """
    a = symmetrize(_as_matrix(a))
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatchError(f"Expected a square matrix, got {a.shape}")

    try:
        return linalg.cho_factor(a, lower=True, check_finite=True)
    except linalg.LinAlgError:
        pass

    jitter = jitter_for(a)
    if not np.isfinite(jitter) or jitter <= 0.0:
        raise NotPositiveDefiniteError(
            f"Matrix of size {a.shape[0]} is not positive definite and has non-positive trace"
        )

    logger.warning(f"Cholesky failed, retrying with jitter {jitter:.3e}")
    try:
        return linalg.cho_factor(a + jitter * np.eye(a.shape[0]), lower=True, check_finite=True)
    except linalg.LinAlgError as e:
        raise NotPositiveDefiniteError(f"Matrix not positive definite after jitter: {e}") from e


def spd_solve(a, b) -> np.ndarray:
    """
    Solve a·x = b for symmetric positive definite a without forming a⁻¹.

    Args:
        a: SPD matrix (symmetrized before factorization)
        b: Right-hand side, vector or matrix

    Returns:
        x with the shape of b

    Raises:
        NotPositiveDefiniteError: If a cannot be factorized after jitter
        DimensionMismatchError: If b does not conform to a
    """
    a = _as_matrix(a)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != a.shape[0]:
        raise DimensionMismatchError(f"Right-hand side {b.shape} does not conform to {a.shape}")
    factor = cholesky_factor(a)
    return linalg.cho_solve(factor, b, check_finite=False)


def symmetric_eig_extrema(a) -> Tuple[float, float]:
    """
    Minimal and maximal eigenvalue of a symmetric matrix.

    Raises:
        NotSymmetricError: If a is not symmetric within tolerance
    """
    a = _as_matrix(a)
    if not is_symmetric(a):
        raise NotSymmetricError(f"Matrix of shape {a.shape} is not symmetric")
    w = linalg.eigvalsh(symmetrize(a))
    return float(w[0]), float(w[-1])


def spectral_radius_sym(a) -> float:
    """ρ(a) for a symmetric matrix."""
    lo, hi = symmetric_eig_extrema(a)
    return max(abs(lo), abs(hi))


def gram_radius(a) -> float:
    """ρ(aᵀa)^{1/2}, i.e. the largest singular value of a."""
    a = _as_matrix(a)
    if a.size == 0:
        return 0.0
    return float(np.sqrt(max(spectral_radius_sym(symmetrize(a.T @ a)), 0.0)))


def spectral_radius_bound_blocks(blocks: Iterable[Block]) -> float:
    """
    Upper bound on the spectral radius of a block matrix.

    Evaluates Σ_{i,j} ρ(A_ijᵀ A_ij)^{1/2} over the tiles.

    Args:
        blocks: (tile, (row_offset, col_offset)) pairs that tile a square matrix

    Returns:
        The bound

    Raises:
        DimensionMismatchError: If the tiles overlap, leave gaps or do not form a square
    """
    blocks = [(_as_matrix(tile), (int(r), int(c))) for tile, (r, c) in blocks]
    if not blocks:
        raise DimensionMismatchError("No blocks given")

    n_rows = max(r + tile.shape[0] for tile, (r, _) in blocks)
    n_cols = max(c + tile.shape[1] for tile, (_, c) in blocks)
    if n_rows != n_cols:
        raise DimensionMismatchError(f"Blocks tile a {n_rows}x{n_cols} matrix, not a square one")

    coverage = np.zeros((n_rows, n_cols), dtype=int)
    for tile, (r, c) in blocks:
        if r < 0 or c < 0:
            raise DimensionMismatchError(f"Negative block offset ({r}, {c})")
        coverage[r:r + tile.shape[0], c:c + tile.shape[1]] += 1
    if np.any(coverage != 1):
        raise DimensionMismatchError("Blocks overlap or leave gaps")

    return float(sum(gram_radius(tile) for tile, _ in blocks))


def partition_blocks(a, sizes: Sequence[int]) -> List[Block]:
    """
    Cut a square matrix into tiles along a common row/column partition.

    Args:
        a: Square matrix
        sizes: Block sizes summing to the matrix order

    Returns:
        Tiles with their offsets, ready for spectral_radius_bound_blocks
    """
    a = _as_matrix(a)
    if a.shape[0] != a.shape[1] or sum(sizes) != a.shape[0]:
        raise DimensionMismatchError(f"Partition {list(sizes)} does not tile {a.shape}")
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(int)
    return [
        (a[ri:ri + si, cj:cj + sj], (int(ri), int(cj)))
        for ri, si in zip(offsets, sizes)
        for cj, sj in zip(offsets, sizes)
    ]


def psd_sqrt(a) -> np.ndarray:
    """
    Symmetric square root S with S·S = a for a PSD matrix.

    Eigenvalues above -1e-9 * trace(a) / n are clipped to zero; anything
    more negative is not a covariance.

    Raises:
        NotPositiveDefiniteError: If a has a clearly negative eigenvalue
    """
    a = symmetrize(_as_matrix(a))
    w, v = linalg.eigh(a)
    floor = -max(abs(jitter_for(a)), np.finfo(float).tiny)
    if w[0] < floor:
        raise NotPositiveDefiniteError(f"Matrix is not positive semidefinite (min eigenvalue {w[0]:.3e})")
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T
