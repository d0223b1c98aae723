"""
Stationary costs of stable realizations.
"""

from typing import Optional, Sequence

import numpy as np

from ..kalman import lyapunov_iterate
from ..team import TeamWeight

__all__ = ["analytic_cost", "expand_node_weight"]


def analytic_cost(F: np.ndarray, G: np.ndarray, H: np.ndarray, tol: float = 1.e-12, max_iter: int = 100000) -> float:
    """
    trace(H Sigma H^T) for the stationary Sigma = F Sigma F^T + G G^T of x+ = F x + G w, w white.

    Raises ``InstabilityError`` when F has spectral radius of at least one.
    """
    F = np.atleast_2d(np.asarray(F, dtype=float))
    G = np.atleast_2d(np.asarray(G, dtype=float))
    H = np.atleast_2d(np.asarray(H, dtype=float))
    sigma = lyapunov_iterate(F, G @ G.T, tol=tol, max_iter=max_iter)
    return float(np.trace(H @ sigma @ H.T))


def expand_node_weight(W: Optional[np.ndarray], n_dims: Sequence[int]) -> Optional[np.ndarray]:
    """
    Returns an n x n state weight; N x N node weights are expanded to W (x) I.
    """
    if W is None:
        return None
    W = np.asarray(W, dtype=float)
    n = int(sum(n_dims))
    if W.shape == (n, n):
        return W
    return TeamWeight(W=W).expand(n_dims)
