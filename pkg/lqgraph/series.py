"""
Truncated block-partitioned matrix power series carrying a sparsity law.

A series G(lambda) = sum_t g(t) lambda^t is stored by its coefficients g(0..T). When a law A is attached,
block (i, j) of g(t) is exactly zero wherever [A^t]_ij = 0. Every operation masks its result, so structural
zeros stay exact rather than merely small.
"""

import logging
from typing import Optional, Sequence, Tuple

import numpy as np
from pydantic import Field, model_validator

from .exceptions import DimensionError, LawViolationError
from .graphnet import AdjacencyMatrix, pattern, transpose_graph
from .models import Dims, FloatArray, ProtoModel
from .util import block_shape, block_slices, expand_mask

__all__ = [
    "MatrixSeries", "allowed_mask", "multiply", "feedback_inverse", "transpose", "membership", "norm", "identity",
    "zeros", "from_lag", "add", "scale", "shift", "mask", "truncate", "quadratic_invariance_residual",
    "random_series"
]

logger = logging.getLogger(__name__)


def allowed_mask(law: AdjacencyMatrix, row_dims: Sequence[int], col_dims: Sequence[int], T: int) -> np.ndarray:
    """
    Boolean array of shape (T+1, rows, cols), True where the law permits a nonzero entry.
    """
    ret = np.empty((T + 1, ) + block_shape(row_dims, col_dims), dtype=bool)
    for s in range(T + 1):
        if s < law.N:
            current = expand_mask(pattern(law, s), row_dims, col_dims)
        ret[s] = current
    return ret


class MatrixSeries(ProtoModel):
    """
    A truncated matrix power series g(0) + g(1) lambda + ... + g(T) lambda^T.
    """
    coeffs: FloatArray = Field(..., description="Coefficients stacked along the first axis, shape (T+1, rows, cols).")
    row_dims: Dims = Field(..., description="Row block partition.")
    col_dims: Dims = Field(..., description="Column block partition.")
    law: Optional[AdjacencyMatrix] = Field(None, description="Sparsity law declaring membership in S_A.")

    @model_validator(mode="after")
    def check_series(self):
        if self.coeffs.ndim != 3 or self.coeffs.shape[0] < 1:
            raise ValueError("Coefficients must have shape (T+1, rows, cols), found {}.".format(self.coeffs.shape))
        if any(d < 0 for d in self.row_dims + self.col_dims):
            raise ValueError("Block dimensions must be nonnegative.")
        if self.coeffs.shape[1:] != block_shape(self.row_dims, self.col_dims):
            raise ValueError("Coefficient shape {} does not match partitions {} x {}.".format(
                self.coeffs.shape[1:], self.row_dims, self.col_dims))
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("Series coefficients must be finite.")

        if self.law is not None:
            if len(self.row_dims) != self.law.N or len(self.col_dims) != self.law.N:
                raise ValueError("Partitions must have {} blocks to carry the attached law.".format(self.law.N))
            allowed = allowed_mask(self.law, self.row_dims, self.col_dims, self.T)
            if np.any(self.coeffs[~allowed] != 0):
                raise ValueError("Coefficients are nonzero on blocks forbidden by the attached law.")
        return self

    @property
    def T(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def shape(self) -> Tuple[int, int]:
        return self.coeffs.shape[1], self.coeffs.shape[2]

    def __getitem__(self, s: int) -> np.ndarray:
        return self.coeffs[s]

    def block(self, s: int, i: int, j: int) -> np.ndarray:
        """
        Block (i, j) of the lag-s coefficient.
        """
        return self.coeffs[s][block_slices(self.row_dims)[i], block_slices(self.col_dims)[j]]

    def without_law(self) -> "MatrixSeries":
        return MatrixSeries(coeffs=self.coeffs, row_dims=self.row_dims, col_dims=self.col_dims)


def _build(coeffs: np.ndarray, row_dims, col_dims, law: Optional[AdjacencyMatrix]) -> MatrixSeries:
    if law is not None:
        allowed = allowed_mask(law, row_dims, col_dims, coeffs.shape[0] - 1)
        coeffs = np.where(allowed, coeffs, 0.0)
    return MatrixSeries(coeffs=coeffs, row_dims=tuple(row_dims), col_dims=tuple(col_dims), law=law)


def _common_law(G1: MatrixSeries, G2: MatrixSeries) -> Optional[AdjacencyMatrix]:
    """
    The law shared by both operands; ``None`` (a lawless result) as soon as either operand carries none.
    """
    if G1.law is None or G2.law is None:
        return None
    if not G1.law.same_structure(G2.law):
        raise LawViolationError("Operands carry different sparsity laws.")
    return G1.law


def multiply(G1: MatrixSeries, G2: MatrixSeries) -> MatrixSeries:
    """
    Series product, g3(t) = sum_{s <= t} g1(s) g2(t-s), truncated at the shorter horizon.
    """
    if G1.col_dims != G2.row_dims:
        raise DimensionError("Cannot multiply series with column partition {} by row partition {}.".format(
            G1.col_dims, G2.row_dims))
    law = _common_law(G1, G2)

    T = min(G1.T, G2.T)
    coeffs = np.zeros((T + 1, G1.shape[0], G2.shape[1]))
    for t in range(T + 1):
        for s in range(t + 1):
            coeffs[t] += G1.coeffs[s] @ G2.coeffs[t - s]

    return _build(coeffs, G1.row_dims, G2.col_dims, law)


def feedback_inverse(H2: MatrixSeries, H1: MatrixSeries) -> MatrixSeries:
    """
    Evaluates H2 (I - H1)^-1 for a strictly causal loop H1.

    The recursion g3(t) = h2(t) + sum_{s=1..t} g3(t-s) h1(s) sums H2 H1^s without forming powers.
    """
    if H1.row_dims != H1.col_dims:
        raise DimensionError("Loop series must be square, found {} x {}.".format(H1.row_dims, H1.col_dims))
    if H2.col_dims != H1.row_dims:
        raise DimensionError("Cannot close a loop of partition {} after a series with columns {}.".format(
            H1.row_dims, H2.col_dims))
    if np.any(H1.coeffs[0] != 0):
        raise ValueError("Loop series must be strictly causal (h1(0) = 0).")
    law = _common_law(H2, H1)

    T = min(H1.T, H2.T)
    allowed = None if law is None else allowed_mask(law, H2.row_dims, H2.col_dims, T)
    coeffs = np.zeros((T + 1, ) + H2.shape)
    for t in range(T + 1):
        acc = H2.coeffs[t].copy()
        for s in range(1, t + 1):
            acc += coeffs[t - s] @ H1.coeffs[s]
        if allowed is not None:
            acc[~allowed[t]] = 0.0
        coeffs[t] = acc

    return _build(coeffs, H2.row_dims, H2.col_dims, law)


def transpose(G: MatrixSeries) -> MatrixSeries:
    law = None if G.law is None else transpose_graph(G.law)
    return MatrixSeries(coeffs=np.transpose(G.coeffs, (0, 2, 1)), row_dims=G.col_dims, col_dims=G.row_dims, law=law)


def membership(G: MatrixSeries, A: AdjacencyMatrix, tol: float = 0.0) -> bool:
    """
    True iff every block forbidden by A has max-abs entry at most ``tol`` at every lag.
    """
    if len(G.row_dims) != A.N or len(G.col_dims) != A.N:
        raise DimensionError("Series partitions {} x {} do not match a graph of {} nodes.".format(
            G.row_dims, G.col_dims, A.N))

    allowed = allowed_mask(A, G.row_dims, G.col_dims, G.T)
    forbidden = np.abs(G.coeffs[~allowed])
    if forbidden.size == 0:
        return True
    return bool(np.max(forbidden) <= tol)


def norm(G: MatrixSeries) -> float:
    """
    sqrt(sum_t ||g(t)||_F^2).
    """
    return float(np.sqrt(np.sum(G.coeffs**2)))


def identity(dims: Sequence[int], T: int, law: Optional[AdjacencyMatrix] = None) -> MatrixSeries:
    n = int(np.sum(dims))
    coeffs = np.zeros((T + 1, n, n))
    coeffs[0] = np.eye(n)
    return _build(coeffs, dims, dims, law)


def zeros(row_dims: Sequence[int], col_dims: Sequence[int], T: int,
          law: Optional[AdjacencyMatrix] = None) -> MatrixSeries:
    return _build(np.zeros((T + 1, ) + block_shape(row_dims, col_dims)), row_dims, col_dims, law)


def from_lag(mat: np.ndarray,
             lag: int,
             row_dims: Sequence[int],
             col_dims: Sequence[int],
             T: int,
             law: Optional[AdjacencyMatrix] = None) -> MatrixSeries:
    """
    The monomial mat * lambda^lag. Entries the law forbids at that lag raise instead of being dropped.
    """
    coeffs = np.zeros((T + 1, ) + block_shape(row_dims, col_dims))
    if lag <= T:
        coeffs[lag] = mat
    if law is not None and np.any(coeffs[~allowed_mask(law, row_dims, col_dims, T)] != 0):
        raise LawViolationError("Matrix has entries outside pattern(A, {}).".format(lag))
    return _build(coeffs, row_dims, col_dims, law)


def add(G1: MatrixSeries, G2: MatrixSeries) -> MatrixSeries:
    if G1.row_dims != G2.row_dims or G1.col_dims != G2.col_dims:
        raise DimensionError("Cannot add series of partitions {} x {} and {} x {}.".format(
            G1.row_dims, G1.col_dims, G2.row_dims, G2.col_dims))
    law = _common_law(G1, G2)
    T = min(G1.T, G2.T)
    return _build(G1.coeffs[:T + 1] + G2.coeffs[:T + 1], G1.row_dims, G1.col_dims, law)


def scale(G: MatrixSeries, factor: float) -> MatrixSeries:
    return _build(factor * G.coeffs, G.row_dims, G.col_dims, G.law)


def shift(G: MatrixSeries) -> MatrixSeries:
    """
    Multiplies by lambda, keeping the horizon (the last coefficient falls off).
    """
    coeffs = np.zeros_like(G.coeffs)
    coeffs[1:] = G.coeffs[:-1]
    return _build(coeffs, G.row_dims, G.col_dims, G.law)


def mask(G: MatrixSeries, A: AdjacencyMatrix) -> MatrixSeries:
    """
    Projects G onto S_A by zeroing every forbidden block, and attaches A as its law.
    """
    return _build(G.coeffs, G.row_dims, G.col_dims, A)


def truncate(G: MatrixSeries, T: int) -> MatrixSeries:
    if T > G.T:
        raise ValueError("Cannot extend a series of horizon {} to {}.".format(G.T, T))
    return MatrixSeries(coeffs=G.coeffs[:T + 1], row_dims=G.row_dims, col_dims=G.col_dims, law=G.law)


def quadratic_invariance_residual(K: MatrixSeries, G: MatrixSeries) -> float:
    """
    Largest forbidden-block magnitude of K G K measured against the law of K.

    Zero whenever K and G respect a common law.
    """
    if K.law is None:
        raise ValueError("K must carry a sparsity law.")

    KGK = multiply(multiply(K.without_law(), G.without_law()), K.without_law())
    allowed = allowed_mask(K.law, KGK.row_dims, KGK.col_dims, KGK.T)
    forbidden = np.abs(KGK.coeffs[~allowed])
    return float(np.max(forbidden)) if forbidden.size else 0.0


def random_series(law: AdjacencyMatrix,
                  row_dims: Sequence[int],
                  col_dims: Sequence[int],
                  T: int,
                  rng: np.random.Generator,
                  strictly_causal: bool = False) -> MatrixSeries:
    """
    Standard normal coefficients on every block the law permits.
    """
    coeffs = rng.standard_normal((T + 1, ) + block_shape(row_dims, col_dims))
    if strictly_causal:
        coeffs[0] = 0.0
    return _build(coeffs, row_dims, col_dims, law)
