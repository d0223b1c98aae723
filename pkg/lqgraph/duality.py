"""
Transforms between state feedback, disturbance feedforward and transposed estimators.

Sign conventions: a state-feedback law reads u = K(q^-1) x and a feedforward law reads u = -G(q^-1) w(t-1).
Under these signs the two are related by

    G = -K (I - A lambda - B lambda K)^-1        K = -G (I - B lambda G)^-1 (I - A lambda)

and the optimal feedforward controller of a system is the transpose of the optimal estimator of its dual,
g(s) = l(s)^T.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import Field, model_validator

from . import series
from .exceptions import DimensionError, LawViolationError
from .graphnet import AdjacencyMatrix, transpose_graph
from .kalman import FilterRealization, synthesize_all
from .lifting import LiftedSystem, lift
from .models import Dims, FloatArray, ProblemKind, ProtoModel
from .series import MatrixSeries
from .sysmodel import BlockSystem, ProblemSpec, adjacency_of, dualize
from .util import block_slices

__all__ = [
    "NodeController", "ControllerRealization", "feedback_to_feedforward", "feedforward_to_feedback",
    "dual_estimator_to_controller", "controller_impulse_response", "dual_problem", "synthesize_controller"
]

logger = logging.getLogger(__name__)


class NodeController(ProtoModel):
    """
    Controller i: z_i(t+1) = F z_i(t) + G_in w_i(t), v_i(t) = H z_i(t).

    Row block (j, k) of v_i is added to u_j with a delay of k - 1 steps.
    """
    node: int = Field(..., description="Zero-based node index.")
    F: FloatArray = Field(..., description="State matrix A_e^T - E_i^T K_i^T.")
    G_in: FloatArray = Field(..., description="Input matrix Gamma_i^T driven by w_i.")
    H: FloatArray = Field(..., description="Output matrix -K_i^T.")
    pairs: Tuple[Tuple[int, int], ...] = Field(..., description="(node, delay + 1) pairs labelling the rows of H.")

    @model_validator(mode="after")
    def check_shapes(self):
        n_e = self.F.shape[0]
        if self.F.shape != (n_e, n_e) or self.G_in.shape[0] != n_e or self.H.shape[1] != n_e:
            raise ValueError("Controller {} has inconsistent matrix shapes.".format(self.node + 1))
        return self


class ControllerRealization(ProtoModel):
    """
    Sum of N node controllers, u(t) = sum_i u_i(t).
    """
    nodes: Tuple[NodeController, ...] = Field(..., description="One controller per node, in node order.")
    u_dims: Dims = Field(..., description="Control input dimension of every node.")
    w_dims: Dims = Field(..., description="Disturbance (state) dimension of every node.")
    memory: int = Field(..., description="Register depth of the dual lift the controllers came from.")
    law: AdjacencyMatrix = Field(..., description="Adjacency of the controlled plant.")

    @model_validator(mode="after")
    def check_nodes(self):
        N = len(self.nodes)
        if len(self.u_dims) != N or len(self.w_dims) != N or self.law.N != N:
            raise ValueError("Controller partitions must have one block per node.")
        for i, ctrl in enumerate(self.nodes):
            if ctrl.node != i:
                raise ValueError("Controllers must be stored in node order.")
            if ctrl.G_in.shape[1] != self.w_dims[i]:
                raise ValueError("Controller {} reads {} disturbances, node has {}.".format(
                    i + 1, ctrl.G_in.shape[1], self.w_dims[i]))
            if ctrl.H.shape[0] != sum(self.u_dims[j] for j, _ in ctrl.pairs):
                raise ValueError("Controller {} output rows do not match its pairs.".format(i + 1))
        return self

    @property
    def N(self) -> int:
        return len(self.nodes)

    @property
    def order(self) -> int:
        return sum(ctrl.F.shape[0] for ctrl in self.nodes)

    def output_rows(self, i: int) -> List[Tuple[int, int, slice]]:
        """
        (target node j, delay k - 1, row slice of H) for every output block of controller i.
        """
        ret = []
        start = 0
        for j, k in self.nodes[i].pairs:
            stop = start + self.u_dims[j]
            ret.append((j, k - 1, slice(start, stop)))
            start = stop
        return ret


def _lag_zero(mat: np.ndarray, row_dims: Sequence[int], col_dims: Sequence[int], T: int,
              law: AdjacencyMatrix) -> MatrixSeries:
    return series.from_lag(np.asarray(mat, dtype=float), 0, row_dims, col_dims, T, law)


def _require_law(G: MatrixSeries, law: AdjacencyMatrix, name: str) -> MatrixSeries:
    if not series.membership(G, law):
        raise LawViolationError("{} does not respect the sparsity law of the plant.".format(name))
    return series.mask(G, law)


def feedback_to_feedforward(K: MatrixSeries, A: np.ndarray, B: np.ndarray, n_dims: Optional[Sequence[int]] = None,
                            law: Optional[AdjacencyMatrix] = None) -> MatrixSeries:
    """
    The feedforward law G = -K (I - A lambda - B lambda K)^-1 producing the same inputs as u = K x.

    ``K`` maps states (columns ``n_dims``) to inputs. The law defaults to the one carried by K.
    """
    law = K.law if law is None else law
    if law is None:
        raise ValueError("A sparsity law is required, attach one to K or pass it explicitly.")
    n_dims = K.col_dims if n_dims is None else tuple(n_dims)
    A, B = np.asarray(A, dtype=float), np.asarray(B, dtype=float)
    if K.col_dims != tuple(n_dims) or A.shape != (sum(n_dims), sum(n_dims)) or B.shape != (sum(n_dims), K.shape[0]):
        raise DimensionError("K, A and B have inconsistent dimensions.")

    K = _require_law(K, law, "K")
    T = K.T
    A_lam = series.from_lag(A, 1, n_dims, n_dims, T, law)
    BK_lam = series.shift(series.multiply(_lag_zero(B, n_dims, K.row_dims, T, law), K))
    return series.feedback_inverse(series.scale(K, -1.0), series.add(A_lam, BK_lam))


def feedforward_to_feedback(G: MatrixSeries, A: np.ndarray, B: np.ndarray, n_dims: Optional[Sequence[int]] = None,
                            law: Optional[AdjacencyMatrix] = None) -> MatrixSeries:
    """
    The state-feedback law K = -G (I - B lambda G)^-1 (I - A lambda), inverse of ``feedback_to_feedforward``.

    Truncation makes the round trip exact on lags 0..T-2 only.
    """
    law = G.law if law is None else law
    if law is None:
        raise ValueError("A sparsity law is required, attach one to G or pass it explicitly.")
    n_dims = G.col_dims if n_dims is None else tuple(n_dims)
    A, B = np.asarray(A, dtype=float), np.asarray(B, dtype=float)
    if G.col_dims != tuple(n_dims) or A.shape != (sum(n_dims), sum(n_dims)) or B.shape != (sum(n_dims), G.shape[0]):
        raise DimensionError("G, A and B have inconsistent dimensions.")

    G = _require_law(G, law, "G")
    T = G.T
    BG_lam = series.shift(series.multiply(_lag_zero(B, n_dims, G.row_dims, T, law), G))
    X = series.feedback_inverse(series.scale(G, -1.0), BG_lam)

    I_minus_A = series.add(series.identity(n_dims, T, law),
                           series.from_lag(-A, 1, n_dims, n_dims, T, law))
    return series.multiply(X, I_minus_A)


def dual_estimator_to_controller(filters: Sequence[FilterRealization], L: LiftedSystem) -> ControllerRealization:
    """
    Transposes the node filters of the dual lift into node controllers of the original plant.
    """
    if len(filters) != L.N:
        raise DimensionError("Expected {} filters, found {}.".format(L.N, len(filters)))

    nodes = []
    for i, f in enumerate(filters):
        if f.node != i or f.F.shape != (L.n_e, L.n_e) or f.G_in.shape != (L.n_e, L.rows(i)):
            raise DimensionError("Filter {} does not match the dual lift.".format(i + 1))
        nodes.append(NodeController(node=i, F=f.F.T, G_in=f.H.T, H=-f.G_in.T, pairs=L.pairs[i]))

    # Dual outputs are the plant inputs, dual states the plant states
    return ControllerRealization(nodes=tuple(nodes),
                                 u_dims=L.base.p_dims,
                                 w_dims=L.base.n_dims,
                                 memory=L.memory,
                                 law=transpose_graph(L.law))


def controller_impulse_response(controller: ControllerRealization, T: int) -> MatrixSeries:
    """
    The series G with u(t) = -sum_s g(s) w(t-1-s), read off the controller state-space data.
    """
    if T < 1:
        raise ValueError("Horizon must be at least 1, found {}.".format(T))

    us = block_slices(controller.u_dims)
    ws = block_slices(controller.w_dims)
    coeffs = np.zeros((T + 1, sum(controller.u_dims), sum(controller.w_dims)))
    for i, ctrl in enumerate(controller.nodes):
        markov = []
        current = ctrl.G_in
        for _ in range(T + 1):
            markov.append(-ctrl.H @ current)
            current = ctrl.F @ current

        for j, delay, rows in controller.output_rows(i):
            for s in range(delay, T + 1):
                coeffs[s, us[j], ws[i]] += markov[s - delay][rows, :]

    return MatrixSeries(coeffs=coeffs, row_dims=controller.u_dims, col_dims=controller.w_dims, law=controller.law)


_DUAL_KINDS = {
    ProblemKind.estimation: ProblemKind.feedforward,
    ProblemKind.feedforward: ProblemKind.estimation,
}


def dual_problem(p: ProblemSpec) -> ProblemSpec:
    """
    Swaps an estimation problem with the feedforward problem of the dual system, and back.
    """
    if p.kind not in _DUAL_KINDS:
        raise ValueError("Problem kind '{}' has no dual; expected estimation or feedforward.".format(p.kind.value))

    return ProblemSpec(kind=_DUAL_KINDS[p.kind],
                       system=dualize(p.system),
                       weight=p.weight,
                       weight_root=p.weight_root,
                       options=p.options)


def synthesize_controller(sys: BlockSystem,
                          M: Optional[int] = None,
                          tol: float = 1.e-11,
                          max_iter: int = 10000,
                          threads: int = 1) -> ControllerRealization:
    """
    Optimal feedforward controller of ``sys``: dualize, lift, synthesize node filters and transpose.

    Only white disturbances are handled here; correlated ones go through ``team.correlated_to_weighted``.
    """
    if sys.noise_cov is not None and not np.allclose(sys.noise_cov, np.eye(sys.noise_cov.shape[0]), rtol=0,
                                                     atol=1.e-14):
        raise ValueError("Disturbance covariance must be the identity; use the weighted team reduction instead.")

    dual_lift = lift(dualize(sys.with_noise(None)), M)
    filters = synthesize_all(dual_lift, tol=tol, max_iter=max_iter, threads=threads)
    for f in filters:
        if not f.riccati.converged:
            logger.warning("Dual filter of node {} did not converge; controller is approximate.".format(f.node + 1))

    controller = dual_estimator_to_controller(filters, dual_lift)
    if not controller.law.same_structure(adjacency_of(sys)):
        raise LawViolationError("Controller law does not match the plant adjacency.")
    return controller
