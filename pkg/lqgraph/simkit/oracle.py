"""
Structured least-squares oracles.

Both oracles solve the finite-horizon problem at time T from a zero initial state directly, over every
impulse-response coefficient the sparsity law leaves free. They share nothing with the Riccati machinery and
serve as its independent reference.
"""

import logging
from typing import Optional, Tuple

import numpy as np
import scipy.linalg
from pydantic import Field

from ..graphnet import AdjacencyMatrix
from ..models import ProtoModel
from ..series import MatrixSeries, allowed_mask
from ..sysmodel import BlockSystem, adjacency_of
from ..util import RANK_TOL, block_slices, psd_sqrt
from .costs import expand_node_weight

__all__ = ["OracleSolution", "structured_ls_oracle", "feedforward_oracle", "estimator_cost"]

logger = logging.getLogger(__name__)


class OracleSolution(ProtoModel):
    """
    Optimal masked coefficients s = 0..T-1 and the optimal finite-horizon cost.
    """
    coeffs: MatrixSeries = Field(..., description="l(s) (estimation) or g(s) (feedforward), masked by the law.")
    cost: float = Field(..., description="Optimal weighted cost.")
    node_costs: Tuple[float, ...] = Field(
        (), description="Cost carried by every node's error rows (estimation) or disturbance columns (feedforward). "
        "Empty for coupled weights.")
    residual: float = Field(..., description="Norm of the normal-equation residual Phi^T (b - Phi theta).")
    rhs_norm: float = Field(..., description="Norm of the normal-equation right-hand side Phi^T b.")
    rank_deficient: bool = Field(False, description="True when the design matrix lost rank.")
    horizon: int = Field(..., description="Horizon T of the finite problem.")


def _powers(A: np.ndarray, T: int):
    ret = [np.eye(A.shape[0])]
    for _ in range(T - 1):
        ret.append(A @ ret[-1])
    return ret


def _toeplitz_design(kernel: np.ndarray) -> np.ndarray:
    # Block (q-1, s) is kernel[q-1-s]^T for s <= q-1
    T, cols, K = kernel.shape
    ret = np.zeros((T * K, T * cols))
    for q in range(T):
        for s in range(q + 1):
            ret[q * K:(q + 1) * K, s * cols:(s + 1) * cols] = kernel[q - s].T
    return ret


def _lstsq(design: np.ndarray, rhs: np.ndarray, rank_tol: float) -> Tuple[np.ndarray, float, float, bool]:
    if design.shape[1] == 0:
        return np.zeros(0), 0.0, 0.0, False

    theta, _, rank, _ = scipy.linalg.lstsq(design, rhs, cond=rank_tol)
    deficient = rank < design.shape[1]
    resid = design.T @ (rhs - design @ theta)
    return theta, float(np.linalg.norm(resid)), float(np.linalg.norm(design.T @ rhs)), deficient


def _solve_structured(target: np.ndarray,
                      kernel: np.ndarray,
                      allowed: np.ndarray,
                      weight_root: Optional[np.ndarray],
                      rank_tol: float = RANK_TOL):
    """
    Minimizes sum_q ||Wr e(q)||_F^2 with e(q) = target[q-1] - sum_{s<q} l(s) kernel[q-1-s], q = 1..T.

    ``target`` is (T, rows, K), ``kernel`` (T, cols, K) and ``allowed`` (T, rows, cols). Without a weight the
    rows decouple and are solved one at a time.
    """
    T, rows, K = target.shape
    cols = kernel.shape[1]
    design = _toeplitz_design(kernel)
    coeffs = np.zeros((T, rows, cols))

    residual, rhs_norm, deficient = 0.0, 0.0, False
    if weight_root is None:
        row_costs = np.zeros(rows)
        for a in range(rows):
            free = allowed[:, a, :].reshape(-1)
            b = target[:, a, :].reshape(-1)
            theta, res, rn, defi = _lstsq(design[:, free], b, rank_tol)

            full = np.zeros(T * cols)
            full[free] = theta
            coeffs[:, a, :] = full.reshape(T, cols)
            row_costs[a] = float(np.sum((b - design[:, free] @ theta)**2))
            residual = max(residual, res)
            rhs_norm = max(rhs_norm, rn)
            deficient |= defi
        return coeffs, row_costs, residual, rhs_norm, deficient

    free = allowed.transpose(1, 0, 2).reshape(-1)
    big = np.kron(weight_root, design)[:, free]
    b = np.kron(weight_root, np.eye(T * K)) @ target.transpose(1, 0, 2).reshape(-1)
    theta, residual, rhs_norm, deficient = _lstsq(big, b, rank_tol)

    full = np.zeros(rows * T * cols)
    full[free] = theta
    coeffs = full.reshape(rows, T, cols).transpose(1, 0, 2)
    cost = float(np.sum((b - big @ theta)**2))
    return coeffs, np.array([cost]), residual, rhs_norm, deficient


def _report(deficient: bool, residual: float, rhs_norm: float, name: str):
    if deficient:
        logger.warning("{} design matrix is rank deficient; returning the minimum-norm solution.".format(name))
    if residual > 1.e-8 * max(rhs_norm, 1.0):
        logger.warning("{} normal-equation residual {:.3e} exceeds 1e-8 of the right-hand side.".format(
            name, residual))


def _weight_root(weight: Optional[np.ndarray], n_dims) -> Optional[np.ndarray]:
    W = expand_node_weight(weight, n_dims)
    return None if W is None else psd_sqrt(W)


def structured_ls_oracle(sys: BlockSystem,
                         A: Optional[AdjacencyMatrix] = None,
                         weight: Optional[np.ndarray] = None,
                         T: int = 60,
                         rank_tol: float = RANK_TOL) -> OracleSolution:
    """
    Best structured estimator x_hat(T) = sum_{s<T} l(s) y(T-1-s) of the state at time T.

    The estimation reading of ``sys`` is used, with its noise covariance factored into the responses. ``A``
    (default the plant adjacency) decides which blocks of l(s) are free; ``weight`` is an n x n or N x N cost
    weight.
    """
    if T < 1:
        raise ValueError("Oracle horizon must be at least 1, found {}.".format(T))
    A = adjacency_of(sys) if A is None else A
    noise_root = psd_sqrt(sys.noise_covariance(sys.m))

    powers = _powers(sys.A, T)
    target = np.array([P @ sys.B @ noise_root for P in powers])
    kernel = np.array([sys.D @ noise_root] + [sys.C @ P @ sys.B @ noise_root for P in powers[:-1]])
    allowed = allowed_mask(A, sys.n_dims, sys.p_dims, T - 1)

    coeffs, costs, residual, rhs_norm, deficient = _solve_structured(target, kernel, allowed,
                                                                     _weight_root(weight, sys.n_dims), rank_tol)
    _report(deficient, residual, rhs_norm, "Estimation oracle")

    node_costs = ()
    if weight is None:
        node_costs = tuple(float(np.sum(costs[sl])) for sl in block_slices(sys.n_dims))

    return OracleSolution(coeffs=MatrixSeries(coeffs=coeffs, row_dims=sys.n_dims, col_dims=sys.p_dims, law=A),
                          cost=float(np.sum(costs)),
                          node_costs=node_costs,
                          residual=residual,
                          rhs_norm=rhs_norm,
                          rank_deficient=deficient,
                          horizon=T)


def feedforward_oracle(sys: BlockSystem,
                       A: Optional[AdjacencyMatrix] = None,
                       noise_cov: Optional[np.ndarray] = None,
                       T: int = 60,
                       rank_tol: float = RANK_TOL) -> OracleSolution:
    """
    Best structured feedforward law u(t) = -sum_{s<T} g(s) w(t-1-s) for the output z(T) = C x(T) + D u(T).

    Uses the control reading of ``sys``; disturbances have covariance ``noise_cov`` (default the system's own,
    else the identity). The problem is solved in transposed form, so it is literally the estimation oracle of
    the dual system when the disturbances are white.
    """
    if T < 1:
        raise ValueError("Oracle horizon must be at least 1, found {}.".format(T))
    A = adjacency_of(sys) if A is None else A
    if noise_cov is None:
        noise_cov = sys.noise_covariance(sys.n)
    noise_cov = np.asarray(noise_cov, dtype=float)

    powers = _powers(sys.A, T)
    target = np.array([(sys.C @ P).T for P in powers])
    kernel = np.array([sys.D.T] + [(sys.C @ P @ sys.B).T for P in powers[:-1]])
    allowed = allowed_mask(A, sys.m_dims, sys.n_dims, T - 1).transpose(0, 2, 1)

    white = np.allclose(noise_cov, np.eye(sys.n), rtol=0, atol=1.e-14)
    weight_root = None if white else psd_sqrt(noise_cov)
    coeffs, costs, residual, rhs_norm, deficient = _solve_structured(target, kernel, allowed, weight_root, rank_tol)
    _report(deficient, residual, rhs_norm, "Feedforward oracle")

    node_costs = ()
    if white:
        node_costs = tuple(float(np.sum(costs[sl])) for sl in block_slices(sys.n_dims))

    return OracleSolution(coeffs=MatrixSeries(coeffs=coeffs.transpose(0, 2, 1),
                                              row_dims=sys.m_dims,
                                              col_dims=sys.n_dims,
                                              law=A),
                          cost=float(np.sum(costs)),
                          node_costs=node_costs,
                          residual=residual,
                          rhs_norm=rhs_norm,
                          rank_deficient=deficient,
                          horizon=T)


def estimator_cost(sys: BlockSystem, l: MatrixSeries, weight: Optional[np.ndarray] = None) -> float:
    """
    Finite-horizon cost at T = l.T + 1 of the estimator x_hat(T) = sum_s l(s) y(T-1-s).
    """
    T = l.T + 1
    noise_root = psd_sqrt(sys.noise_covariance(sys.m))
    Wr = _weight_root(weight, sys.n_dims)

    powers = _powers(sys.A, T)
    h_y = [sys.D @ noise_root] + [sys.C @ P @ sys.B @ noise_root for P in powers[:-1]]
    cost = 0.0
    for q in range(1, T + 1):
        err = powers[q - 1] @ sys.B @ noise_root
        for s in range(q):
            err = err - l[s] @ h_y[q - 1 - s]
        if Wr is not None:
            err = Wr @ err
        cost += float(np.sum(err**2))
    return cost
