"""
Kalman synthesis on the lifted system, one predictor per node, assembled into the structured estimator.
"""

import logging
import traceback
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import Field

from .exceptions import InstabilityError, NonConvergenceError
from .lifting import LiftedSystem, measurement_map, selector
from .models import FloatArray, ProtoModel
from .series import MatrixSeries
from .sysmodel import BlockSystem
from .util import RANK_TOL, block_slices, psd_pinv, spectral_radius, symmetrize

__all__ = [
    "RiccatiResult", "FilterRealization", "riccati_iterate", "riccati_schedule", "lyapunov_iterate",
    "noise_moments", "synthesize_node_filter", "synthesize_all", "assemble_estimator", "filter_error_covariance",
    "centralized_filter", "run_node_filter"
]

logger = logging.getLogger(__name__)


class RiccatiResult(ProtoModel):
    """
    Stationary predicted error covariance and gain of a Kalman predictor.
    """
    P: FloatArray = Field(..., description="Symmetric predicted error covariance.")
    K: FloatArray = Field(..., description="Predictor gain (A P C^T + S)(C P C^T + R)^+.")
    iterations: int = Field(..., description="Number of fixed-point iterations performed.")
    residual: float = Field(..., description="Max-abs change of P in the last iteration.")
    converged: bool = Field(..., description="True when the residual dropped below the tolerance.")


class FilterRealization(ProtoModel):
    """
    State-space data (A_e - K_i E_i, K_i, Gamma_i) of node i's predictor.
    """
    node: int = Field(..., description="Zero-based node index.")
    F: FloatArray = Field(..., description="State matrix A_e - K_i E_i.")
    G_in: FloatArray = Field(..., description="Input matrix K_i acting on node i's measurement vector.")
    H: FloatArray = Field(..., description="Output matrix Gamma_i.")
    pairs: Tuple[Tuple[int, int], ...] = Field(..., description="Measured (node, lag) pairs labelling G_in columns.")
    riccati: RiccatiResult = Field(..., description="The Riccati solution the gain came from.")
    spectral_radius: float = Field(..., description="Spectral radius of F.")

    @property
    def stabilizing(self) -> bool:
        return self.spectral_radius < 1.0

    @property
    def K(self) -> np.ndarray:
        return self.G_in


def riccati_iterate(A: np.ndarray,
                    C: np.ndarray,
                    Q: np.ndarray,
                    R: np.ndarray,
                    S: Optional[np.ndarray] = None,
                    tol: float = 1.e-11,
                    max_iter: int = 10000,
                    P0: Optional[np.ndarray] = None,
                    rank_tol: float = RANK_TOL) -> RiccatiResult:
    """
    Fixed-point iteration of the predictor Riccati map

        P+ = A P A^T + Q - (A P C^T + S)(C P C^T + R)^+ (A P C^T + S)^T

    started from P0 (default Q). Non-convergence is reported on the result, never silently.
    """
    A = np.asarray(A, dtype=float)
    C = np.asarray(C, dtype=float)
    if S is None:
        S = np.zeros((A.shape[0], C.shape[0]))

    P = symmetrize(np.array(Q if P0 is None else P0, dtype=float))
    residual = np.inf
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        cross = A @ P @ C.T + S
        K = cross @ psd_pinv(C @ P @ C.T + R, rank_tol)
        P_new = symmetrize(A @ P @ A.T + Q - K @ cross.T)
        if not np.all(np.isfinite(P_new)):
            raise NonConvergenceError("Riccati iteration produced non-finite values at step {}.".format(iterations))

        residual = float(np.max(np.abs(P_new - P))) if P.size else 0.0
        P = P_new
        if residual < tol:
            converged = True
            break

    if not converged:
        logger.warning("Riccati iteration did not converge in {} steps (residual {:.3e}).".format(max_iter, residual))
    else:
        logger.debug("Riccati iteration converged in {} steps (residual {:.3e}).".format(iterations, residual))

    K = (A @ P @ C.T + S) @ psd_pinv(C @ P @ C.T + R, rank_tol)
    return RiccatiResult(P=P, K=K, iterations=iterations, residual=residual, converged=converged)


def riccati_schedule(A: np.ndarray,
                     C: np.ndarray,
                     Q: np.ndarray,
                     R: np.ndarray,
                     S: Optional[np.ndarray] = None,
                     T: int = 1,
                     P0: Optional[np.ndarray] = None,
                     rank_tol: float = RANK_TOL) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """
    Time-varying predictor gains K(0..T-1) and covariances P(0..T) from P(0) = P0 (default zero).
    """
    if S is None:
        S = np.zeros((A.shape[0], C.shape[0]))
    P = np.zeros_like(A, dtype=float) if P0 is None else symmetrize(np.array(P0, dtype=float))

    gains, covs = [], [P]
    for _ in range(T):
        cross = A @ P @ C.T + S
        K = cross @ psd_pinv(C @ P @ C.T + R, rank_tol)
        P = symmetrize(A @ P @ A.T + Q - K @ cross.T)
        gains.append(K)
        covs.append(P)
    return gains, covs


def lyapunov_iterate(F: np.ndarray, GGt: np.ndarray, tol: float = 1.e-12, max_iter: int = 100000) -> np.ndarray:
    """
    Stationary solution of Sigma = F Sigma F^T + GGt by fixed-point iteration.
    """
    rho = spectral_radius(F)
    if rho >= 1.0:
        raise InstabilityError("Spectral radius {:.6f} >= 1, no stationary covariance exists.".format(rho))

    sigma = symmetrize(np.array(GGt, dtype=float))
    for _ in range(max_iter):
        sigma_new = symmetrize(F @ sigma @ F.T + GGt)
        residual = float(np.max(np.abs(sigma_new - sigma))) if sigma.size else 0.0
        sigma = sigma_new
        if residual < tol:
            return sigma

    raise NonConvergenceError("Lyapunov iteration did not reach {:.1e} in {} steps.".format(tol, max_iter))


def noise_moments(L: LiftedSystem, i: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    (Q, R, S) = (B_e W B_e^T, D_ei W D_ei^T, B_e W D_ei^T) of node i, W the noise covariance.
    """
    W = L.base.noise_covariance(L.base.m)
    _, D_ei = measurement_map(L, i)
    return L.B_e @ W @ L.B_e.T, D_ei @ W @ D_ei.T, L.B_e @ W @ D_ei.T


def synthesize_node_filter(L: LiftedSystem,
                           i: int,
                           tol: float = 1.e-11,
                           max_iter: int = 10000,
                           rank_tol: float = RANK_TOL) -> FilterRealization:
    """
    Stationary Kalman predictor of node i on the lifted system.

    Only the rows E_i node i is entitled to are measured, so the filter is optimal among estimators that
    respect the information delays of the graph.
    """
    E_i, _ = measurement_map(L, i)
    Q, R, S = noise_moments(L, i)

    res = riccati_iterate(L.A_e, E_i, Q, R, S, tol=tol, max_iter=max_iter, rank_tol=rank_tol)
    F = L.A_e - res.K @ E_i
    rho = spectral_radius(F)
    if rho >= 1.0:
        logger.warning("Filter of node {} is not stabilizing (spectral radius {:.6f}).".format(i + 1, rho))

    return FilterRealization(node=i,
                             F=F,
                             G_in=res.K,
                             H=selector(L, i),
                             pairs=L.pairs[i],
                             riccati=res,
                             spectral_radius=rho)


def synthesize_all(L: LiftedSystem,
                   tol: float = 1.e-11,
                   max_iter: int = 10000,
                   threads: int = 1,
                   order: Optional[Sequence[int]] = None) -> List[FilterRealization]:
    """
    Synthesizes every node filter independently, optionally on a thread pool.

    The result is in node order whatever the processing ``order``.
    """
    order = list(range(L.N)) if order is None else list(order)
    if sorted(order) != list(range(L.N)):
        raise ValueError("Processing order must be a permutation of the node indices.")

    results = {}
    if threads <= 1:
        for i in order:
            results[i] = synthesize_node_filter(L, i, tol, max_iter)
    else:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            futures = {i: executor.submit(synthesize_node_filter, L, i, tol, max_iter) for i in order}
            for i, future in futures.items():
                try:
                    results[i] = future.result()
                except Exception:
                    logger.error("Synthesis of node {} failed:\n{}".format(i + 1, traceback.format_exc()))
                    raise

    return [results[i] for i in range(L.N)]


def _check_filters(filters: Sequence[FilterRealization], L: LiftedSystem):
    if len(filters) != L.N:
        raise ValueError("Expected {} node filters, found {}.".format(L.N, len(filters)))
    for i, f in enumerate(filters):
        if f.node != i or f.F.shape != (L.n_e, L.n_e) or f.G_in.shape != (L.n_e, L.rows(i)):
            raise ValueError("Filter {} does not match the lift.".format(i + 1))


def assemble_estimator(filters: Sequence[FilterRealization], L: LiftedSystem, T: int) -> MatrixSeries:
    """
    Stacks the node impulse responses into the structured estimator x_hat(t) = sum_s l(s) y(t-1-s).

    Row (j, k) of node i's measurement reads y_j(t-1-(k-1)), so its response lands on lag s = r + k - 1.
    """
    if T < 1:
        raise ValueError("Estimator horizon must be at least 1, found {}.".format(T))
    _check_filters(filters, L)

    sys = L.base
    xs = block_slices(sys.n_dims)
    ys = block_slices(sys.p_dims)
    coeffs = np.zeros((T + 1, sys.n, sys.p))
    for i, f in enumerate(filters):
        # Markov parameters Gamma_i F^r K_i, r = 0..T
        markov = []
        current = f.G_in
        for _ in range(T + 1):
            markov.append(f.H @ current)
            current = f.F @ current

        for j, k, rows in L.pair_rows(i):
            for s in range(k - 1, T + 1):
                coeffs[s, xs[i], ys[j]] += markov[s - k + 1][:, rows]

    return MatrixSeries(coeffs=coeffs, row_dims=sys.n_dims, col_dims=sys.p_dims, law=L.law)


def filter_error_covariance(f: FilterRealization,
                            L: LiftedSystem,
                            i: int,
                            tol: float = 1.e-12,
                            max_iter: int = 100000) -> Tuple[np.ndarray, float]:
    """
    Stationary error covariance of node i's predictor and its cost trace(Gamma_i Sigma Gamma_i^T).
    """
    if f.spectral_radius >= 1.0:
        raise InstabilityError("Filter of node {} is not stabilizing (spectral radius {:.6f}).".format(
            i + 1, f.spectral_radius))

    _, D_ei = measurement_map(L, i)
    W = L.base.noise_covariance(L.base.m)
    G = L.B_e - f.G_in @ D_ei
    sigma = lyapunov_iterate(f.F, G @ W @ G.T, tol=tol, max_iter=max_iter)
    return sigma, float(np.trace(f.H @ sigma @ f.H.T))


def centralized_filter(sys: BlockSystem, tol: float = 1.e-11, max_iter: int = 10000) -> RiccatiResult:
    """
    Kalman predictor with access to every output, the lower bound for all distributed node costs.
    """
    W = sys.noise_covariance(sys.m)
    return riccati_iterate(sys.A,
                           sys.C,
                           sys.B @ W @ sys.B.T,
                           sys.D @ W @ sys.D.T,
                           sys.B @ W @ sys.D.T,
                           tol=tol,
                           max_iter=max_iter)


def run_node_filter(L: LiftedSystem,
                    i: int,
                    gains: Union[FilterRealization, Sequence[np.ndarray]],
                    lifted_states: np.ndarray,
                    noise: np.ndarray,
                    drive: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Runs node i's predictor along lifted trajectories.

    ``lifted_states`` has shape (..., T+1, n_e) and ``noise`` shape (..., T, m). Returns the extended
    estimates (..., T+1, n_e) and the innovations (..., T, rows of E_i). ``gains`` is a stationary filter or
    a schedule K(0..T-1). A known ``drive`` of shape (..., T, n_e) enters the prediction as it enters the plant.
    """
    E_i, D_ei = measurement_map(L, i)
    T = noise.shape[-2]
    if isinstance(gains, FilterRealization):
        schedule = [gains.G_in] * T
    else:
        schedule = list(gains)
        if len(schedule) < T:
            raise ValueError("Gain schedule covers {} steps, trajectory needs {}.".format(len(schedule), T))

    est = np.zeros(lifted_states.shape)
    innov = np.zeros(noise.shape[:-1] + (E_i.shape[0], ))
    for t in range(T):
        y = lifted_states[..., t, :] @ E_i.T + noise[..., t, :] @ D_ei.T
        innov[..., t, :] = y - est[..., t, :] @ E_i.T
        est[..., t + 1, :] = est[..., t, :] @ L.A_e.T + innov[..., t, :] @ schedule[t].T
        if drive is not None:
            est[..., t + 1, :] += drive[..., t, :]

    return est, innov
