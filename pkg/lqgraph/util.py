"""
Utility functions for lqgraph.
"""

from typing import List, Sequence, Tuple

import numpy as np

RANK_TOL = 1.e-10


def symmetrize(mat: np.ndarray) -> np.ndarray:
    return 0.5 * (mat + mat.T)


def psd_pinv(mat: np.ndarray, rank_tol: float = RANK_TOL) -> np.ndarray:
    """
    Pseudo-inverse of a symmetric positive semidefinite matrix via its eigendecomposition.

    Eigenvalues below ``rank_tol`` times the largest eigenvalue are treated as zero.
    """
    mat = symmetrize(np.asarray(mat, dtype=float))
    if mat.size == 0:
        return np.zeros_like(mat)

    vals, vecs = np.linalg.eigh(mat)
    top = np.max(np.abs(vals))
    if top == 0.0:
        return np.zeros_like(mat)

    keep = vals > rank_tol * top
    inv_vals = np.zeros_like(vals)
    inv_vals[keep] = 1.0 / vals[keep]
    return (vecs * inv_vals) @ vecs.T


def psd_sqrt(mat: np.ndarray) -> np.ndarray:
    """
    Symmetric positive semidefinite square root, negative round-off eigenvalues clipped to zero.
    """
    vals, vecs = np.linalg.eigh(symmetrize(np.asarray(mat, dtype=float)))
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def spectral_radius(mat: np.ndarray) -> float:
    if mat.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(mat))))


def numerical_rank(mat: np.ndarray, rank_tol: float = RANK_TOL) -> int:
    """
    Rank from singular values at least ``rank_tol`` times the largest.
    """
    if mat.size == 0:
        return 0
    sv = np.linalg.svd(mat, compute_uv=False)
    if sv[0] == 0.0:
        return 0
    return int(np.sum(sv >= rank_tol * sv[0]))


def is_spd(mat: np.ndarray) -> bool:
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        return False
    if not np.allclose(mat, mat.T, rtol=0, atol=1.e-12 * max(1.0, np.max(np.abs(mat)))):
        return False
    return bool(np.min(np.linalg.eigvalsh(symmetrize(mat))) > 0)


def block_offsets(dims: Sequence[int]) -> np.ndarray:
    """
    Start offsets of every block followed by the total size.
    """
    return np.concatenate([[0], np.cumsum(dims, dtype=np.int64)])


def block_slices(dims: Sequence[int]) -> List[slice]:
    off = block_offsets(dims)
    return [slice(int(off[k]), int(off[k + 1])) for k in range(len(dims))]


def expand_mask(mask: np.ndarray, row_dims: Sequence[int], col_dims: Sequence[int]) -> np.ndarray:
    """
    Blows an N x N boolean node mask up to the entrywise mask of a block-partitioned matrix.
    """
    return np.repeat(np.repeat(mask, row_dims, axis=0), col_dims, axis=1)


def block_shape(row_dims: Sequence[int], col_dims: Sequence[int]) -> Tuple[int, int]:
    return int(np.sum(row_dims, dtype=np.int64)), int(np.sum(col_dims, dtype=np.int64))
