"""
The interconnected plant: block matrices over a graph of N nodes, its adjacency and impulse responses.

A ``BlockSystem`` is read in one of two ways depending on the problem it is posed for.

Estimation reading
    x(t+1) = A x(t) + B w(t),   y(t) = C x(t) + D w(t),   w ~ N(0, noise_cov) in R^m

Control reading
    x(t+1) = A x(t) + B u(t) + w(t),   z(t) = C x(t) + D u(t),   w ~ N(0, noise_cov) in R^n

``dualize`` maps the control reading of a system to the estimation reading of its dual.
"""

import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from pydantic import Field, field_validator, model_validator

from .config import SynthesisOptions
from .graphnet import AdjacencyMatrix
from .models import Dims, FloatArray, ProblemKind, ProtoModel
from .series import MatrixSeries, allowed_mask
from .util import RANK_TOL, block_slices, expand_mask, is_spd, numerical_rank

__all__ = [
    "BlockSystem", "ProblemKind", "ProblemSpec", "validate", "adjacency_of", "impulse_response", "state_response",
    "dualize"
]

logger = logging.getLogger(__name__)


class BlockSystem(ProtoModel):
    """
    A linear plant partitioned over N nodes with block-diagonal B and C.
    """
    n_dims: Dims = Field(..., description="State dimension n_i of every node.")
    m_dims: Dims = Field(..., description="Input (or noise) dimension m_i of every node.")
    p_dims: Dims = Field(..., description="Output dimension p_i of every node.")
    A: FloatArray = Field(..., description="n x n state matrix with blocks A_ij of shape n_i x n_j.")
    B: FloatArray = Field(..., description="n x m block-diagonal input matrix.")
    C: FloatArray = Field(..., description="p x n block-diagonal output matrix.")
    D: FloatArray = Field(..., description="p x m direct term.")
    noise_cov: Optional[FloatArray] = Field(
        None, description="Disturbance covariance. ``None`` stands for the identity of the matching dimension.")

    @model_validator(mode="after")
    def check_shapes(self):
        N = len(self.n_dims)
        if N < 1 or len(self.m_dims) != N or len(self.p_dims) != N:
            raise ValueError("Node dimension lists must share one length N >= 1.")
        if any(d < 0 for d in self.n_dims + self.m_dims + self.p_dims):
            raise ValueError("Node dimensions must be nonnegative.")

        n, m, p = sum(self.n_dims), sum(self.m_dims), sum(self.p_dims)
        expected = {"A": (n, n), "B": (n, m), "C": (p, n), "D": (p, m)}
        for name, shape in expected.items():
            mat = getattr(self, name)
            if mat.shape != shape:
                raise ValueError("{} has shape {}, expected {}.".format(name, mat.shape, shape))
            if not np.all(np.isfinite(mat)):
                raise ValueError("{} has non-finite entries.".format(name))

        diag = np.eye(N, dtype=bool)
        if np.any(self.B[~expand_mask(diag, self.n_dims, self.m_dims)] != 0):
            raise ValueError("B must be block diagonal.")
        if np.any(self.C[~expand_mask(diag, self.p_dims, self.n_dims)] != 0):
            raise ValueError("C must be block diagonal.")

        if self.noise_cov is not None and (self.noise_cov.ndim != 2
                                           or self.noise_cov.shape[0] != self.noise_cov.shape[1]):
            raise ValueError("noise_cov must be a square matrix.")
        return self

    @classmethod
    def from_blocks(cls,
                    A_blocks: Dict[Tuple[int, int], np.ndarray],
                    B_blocks: Sequence[np.ndarray],
                    C_blocks: Sequence[np.ndarray],
                    D: Optional[np.ndarray] = None,
                    noise_cov: Optional[np.ndarray] = None) -> "BlockSystem":
        """
        Assembles a system from zero-based ``A_blocks[(i, j)]`` and the diagonal blocks of B and C.

        Missing A blocks are zero; dimensions are read off the B and C blocks.
        """
        B_blocks = [np.atleast_2d(np.asarray(b, dtype=float)) for b in B_blocks]
        C_blocks = [np.atleast_2d(np.asarray(c, dtype=float)) for c in C_blocks]
        n_dims = [b.shape[0] for b in B_blocks]
        m_dims = [b.shape[1] for b in B_blocks]
        p_dims = [c.shape[0] for c in C_blocks]

        n = sum(n_dims)
        A = np.zeros((n, n))
        rows = block_slices(n_dims)
        for (i, j), block in A_blocks.items():
            A[rows[i], rows[j]] = block

        if D is None:
            D = np.zeros((sum(p_dims), sum(m_dims)))

        return cls(n_dims=n_dims,
                   m_dims=m_dims,
                   p_dims=p_dims,
                   A=A,
                   B=scipy.linalg.block_diag(*B_blocks),
                   C=scipy.linalg.block_diag(*C_blocks),
                   D=D,
                   noise_cov=noise_cov)

    @property
    def N(self) -> int:
        return len(self.n_dims)

    @property
    def n(self) -> int:
        return sum(self.n_dims)

    @property
    def m(self) -> int:
        return sum(self.m_dims)

    @property
    def p(self) -> int:
        return sum(self.p_dims)

    def A_block(self, i: int, j: int) -> np.ndarray:
        rows = block_slices(self.n_dims)
        return self.A[rows[i], rows[j]]

    def B_block(self, i: int) -> np.ndarray:
        return self.B[block_slices(self.n_dims)[i], block_slices(self.m_dims)[i]]

    def C_block(self, i: int) -> np.ndarray:
        return self.C[block_slices(self.p_dims)[i], block_slices(self.n_dims)[i]]

    def D_rows(self, i: int) -> np.ndarray:
        return self.D[block_slices(self.p_dims)[i], :]

    def noise_covariance(self, dim: int) -> np.ndarray:
        """
        The disturbance covariance, or the identity of size ``dim`` when none is set.
        """
        if self.noise_cov is None:
            return np.eye(dim)
        if self.noise_cov.shape[0] != dim:
            raise ValueError("noise_cov has dimension {}, expected {}.".format(self.noise_cov.shape[0], dim))
        return np.array(self.noise_cov)

    def with_noise(self, noise_cov: Optional[np.ndarray]) -> "BlockSystem":
        return self.model_copy(update={"noise_cov": None if noise_cov is None else np.array(noise_cov, dtype=float)})


class ProblemSpec(ProtoModel):
    """
    A system together with the optimization problem posed for it.
    """
    kind: ProblemKind = Field(..., description=str(ProblemKind.__doc__))
    system: BlockSystem = Field(..., description="The plant the problem is posed for.")
    weight: Optional[FloatArray] = Field(None, description="Cost weight W of the weighted kinds.")
    weight_root: Optional[FloatArray] = Field(
        None, description="Symmetric square root of W when the weight came from a correlated disturbance.")
    options: SynthesisOptions = Field(SynthesisOptions(), description="Horizon and tolerances.")

    @field_validator("weight")
    @classmethod
    def check_weight(cls, v):
        if v is not None and not is_spd(v):
            raise ValueError("Weight must be symmetric positive definite.")
        return v

    @model_validator(mode="after")
    def check_kind(self):
        sys = self.system
        if self.kind == ProblemKind.weighted_estimation and self.weight is None:
            raise ValueError("weighted_estimation requires a weight.")
        if self.weight is not None and self.weight.shape[0] not in (sys.n, sys.N):
            raise ValueError("Weight must be n x n or N x N, found {}.".format(self.weight.shape))
        if self.kind == ProblemKind.correlated_feedback and self.system.noise_cov is None:
            raise ValueError("correlated_feedback requires the disturbance covariance in noise_cov.")
        if not self.kind.is_weighted and sys.noise_cov is not None:
            if not np.allclose(sys.noise_cov, np.eye(sys.noise_cov.shape[0]), rtol=0, atol=1.e-14):
                raise ValueError("Problem kind '{}' requires identity noise covariance.".format(self.kind.value))
        return self


def validate(sys: BlockSystem, kind: Optional[ProblemKind] = None, rank_tol: float = RANK_TOL) -> List[str]:
    """
    Lists every violated standing assumption of ``sys``; an empty list means valid.

    Control problems need full column rank B_ii, estimation problems need full row rank C_ii. Without a kind
    both are checked.
    """
    diagnostics = []
    check_B = kind is None or kind.is_control
    check_C = kind is None or not kind.is_control

    for i in range(sys.N):
        if check_B and sys.m_dims[i] > 0:
            rank = numerical_rank(sys.B_block(i), rank_tol)
            if rank < sys.m_dims[i]:
                diagnostics.append("B_{0}{0} ({1}x{2}) has rank {3}, full column rank {2} required.".format(
                    i + 1, sys.n_dims[i], sys.m_dims[i], rank))
        if check_C and sys.p_dims[i] > 0:
            rank = numerical_rank(sys.C_block(i), rank_tol)
            if rank < sys.p_dims[i]:
                diagnostics.append("C_{0}{0} ({1}x{2}) has rank {3}, full row rank {1} required.".format(
                    i + 1, sys.p_dims[i], sys.n_dims[i], rank))

    if sys.noise_cov is not None:
        if kind is None:
            allowed = {sys.m, sys.n}
        else:
            allowed = {sys.n} if kind.is_control else {sys.m}
        if sys.noise_cov.shape[0] not in allowed:
            diagnostics.append("noise_cov has dimension {}, expected one of {}.".format(
                sys.noise_cov.shape[0], sorted(allowed)))
        if not is_spd(sys.noise_cov):
            diagnostics.append("noise_cov is not symmetric positive definite.")

    return diagnostics


def adjacency_of(sys: BlockSystem) -> AdjacencyMatrix:
    """
    Arrow from j to i iff A_ij has a nonzero entry; every node keeps its loop.
    """
    support = np.zeros((sys.N, sys.N), dtype=bool)
    for i in range(sys.N):
        for j in range(sys.N):
            support[i, j] = bool(np.any(np.abs(sys.A_block(i, j)) > 0))
    return AdjacencyMatrix.from_support(support)


def _matrix_powers_times(A: np.ndarray, B: np.ndarray, T: int) -> List[np.ndarray]:
    # A^0 B, A^1 B, ..., A^(T-1) B
    ret = []
    current = np.array(B, dtype=float)
    for _ in range(T):
        ret.append(current)
        current = A @ current
    return ret


def _with_law_if_respected(coeffs: np.ndarray, row_dims, col_dims, law: AdjacencyMatrix) -> MatrixSeries:
    allowed = allowed_mask(law, row_dims, col_dims, coeffs.shape[0] - 1)
    if np.any(coeffs[~allowed] != 0):
        logger.debug("Response violates the graph law at lag 0 (non block-diagonal D); returning it lawless.")
        return MatrixSeries(coeffs=coeffs, row_dims=row_dims, col_dims=col_dims)
    return MatrixSeries(coeffs=coeffs, row_dims=row_dims, col_dims=col_dims, law=law)


def impulse_response(sys: BlockSystem, T: int) -> MatrixSeries:
    """
    The series D + sum_{t >= 1} C A^(t-1) B lambda^t, truncated at T.
    """
    if T < 0:
        raise ValueError("Horizon must be nonnegative, found {}.".format(T))

    coeffs = np.zeros((T + 1, sys.p, sys.m))
    coeffs[0] = sys.D
    for t, AB in enumerate(_matrix_powers_times(sys.A, sys.B, T), start=1):
        coeffs[t] = sys.C @ AB

    return _with_law_if_respected(coeffs, sys.p_dims, sys.m_dims, adjacency_of(sys))


def state_response(sys: BlockSystem, T: int) -> MatrixSeries:
    """
    The noise-to-state series sum_{t >= 1} A^(t-1) B lambda^t, truncated at T.
    """
    coeffs = np.zeros((T + 1, sys.n, sys.m))
    for t, AB in enumerate(_matrix_powers_times(sys.A, sys.B, T), start=1):
        coeffs[t] = AB

    return _with_law_if_respected(coeffs, sys.n_dims, sys.m_dims, adjacency_of(sys))


def dualize(sys: BlockSystem) -> BlockSystem:
    """
    The adjoint system (A^T, C^T, B^T, D^T) on the reversed graph.
    """
    return BlockSystem(n_dims=sys.n_dims,
                       m_dims=sys.p_dims,
                       p_dims=sys.m_dims,
                       A=sys.A.T,
                       B=sys.C.T,
                       C=sys.B.T,
                       D=sys.D.T,
                       noise_cov=sys.noise_cov)
