"""
Adjacency-matrix arithmetic over the nonnegative integers and the delay/sparsity patterns it induces.

Entry (i, j) of an adjacency matrix counts the edges from node j to node i. Every node carries a loop, so
each node always knows its own past and the support of the powers grows monotonically.
"""

from typing import Iterable, List, Optional, Tuple

import numpy as np
from pydantic import Field, field_validator

from .models import IntArray, ProtoModel

__all__ = [
    "SATURATION_CAP", "UNREACHABLE", "AdjacencyMatrix", "DelayMatrix", "power", "delay_matrix", "pattern",
    "transpose_graph", "from_edges", "star_table"
]

# Only zero/nonzero matters downstream, so path counts saturate here.
SATURATION_CAP = 2**31 - 1

# Sentinel stored in a DelayMatrix for pairs that never communicate.
UNREACHABLE = -1


class AdjacencyMatrix(ProtoModel):
    """
    Integer adjacency matrix of a directed graph with one loop at every node.
    """
    entries: IntArray = Field(..., description="N x N nonnegative integers, entry (i, j) = edges from j to i.")

    @field_validator("entries")
    @classmethod
    def check_entries(cls, v):
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] < 1:
            raise ValueError("Adjacency matrix must be square with N >= 1, found shape {}.".format(v.shape))
        if np.any(v < 0):
            raise ValueError("Adjacency entries must be nonnegative.")
        if np.any(np.diag(v) < 1):
            raise ValueError("Every node must carry a loop (diagonal entries >= 1).")
        return v

    @property
    def N(self) -> int:
        return self.entries.shape[0]

    @property
    def support(self) -> np.ndarray:
        return self.entries > 0

    @classmethod
    def from_support(cls, mask: np.ndarray) -> "AdjacencyMatrix":
        """
        Builds a 0/1 adjacency matrix from a boolean support, forcing the loop at every node.
        """
        mask = np.array(mask, dtype=bool)
        np.fill_diagonal(mask, True)
        return cls(entries=mask.astype(np.int64))

    def same_structure(self, other: "AdjacencyMatrix") -> bool:
        """
        Two adjacency matrices define the same sparsity law iff their supports agree.
        """
        return self.N == other.N and bool(np.array_equal(self.support, other.support))


class DelayMatrix(ProtoModel):
    """
    Minimal information delay between node pairs, ``UNREACHABLE`` where no path exists.
    """
    entries: IntArray = Field(..., description="N x N delays, entry (i, j) = first s with [A^s]_ij != 0.")

    @field_validator("entries")
    @classmethod
    def check_entries(cls, v):
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("Delay matrix must be square, found shape {}.".format(v.shape))
        if np.any(np.diag(v) != 0):
            raise ValueError("Diagonal delays must be zero.")
        if np.any(v > v.shape[0] - 1) or np.any(v < UNREACHABLE):
            raise ValueError("Finite delays must lie in [0, N-1].")
        return v

    @property
    def N(self) -> int:
        return self.entries.shape[0]

    def reachable(self) -> np.ndarray:
        return self.entries != UNREACHABLE

    def get(self, i: int, j: int) -> Optional[int]:
        d = int(self.entries[i, j])
        return None if d == UNREACHABLE else d

    def max_finite(self) -> int:
        return int(np.max(self.entries[self.reachable()]))

    def to_table(self) -> List[List[str]]:
        return [[("inf" if d == UNREACHABLE else str(d)) for d in row] for row in self.entries.tolist()]


def _saturated_matmul(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    # Object arithmetic keeps the products exact before the cap is applied
    prod = left.astype(object).dot(right.astype(object))
    return np.minimum(prod, SATURATION_CAP).astype(np.int64)


def power(A: AdjacencyMatrix, s: int) -> np.ndarray:
    """
    Returns A^s with A^0 = I. Entries saturate at ``SATURATION_CAP``.
    """
    if s < 0:
        raise ValueError("Power must be nonnegative, found {}.".format(s))

    ret = np.eye(A.N, dtype=np.int64)
    base = A.entries.copy()
    while s:
        if s & 1:
            ret = _saturated_matmul(ret, base)
        s >>= 1
        if s:
            base = _saturated_matmul(base, base)
    return ret


def pattern(A: AdjacencyMatrix, s: int) -> np.ndarray:
    """
    Boolean mask of [A^s]_ij != 0.
    """
    if s < 0:
        raise ValueError("Pattern lag must be nonnegative, found {}.".format(s))

    # Supports stop growing after N - 1 steps
    return power(A, min(s, A.N - 1)) != 0


def delay_matrix(A: AdjacencyMatrix) -> DelayMatrix:
    """
    Entry (i, j) is the first s with [A^s]_ij != 0, or ``UNREACHABLE`` if there is none with s <= N - 1.
    """
    delays = np.full((A.N, A.N), UNREACHABLE, dtype=np.int64)
    current = np.eye(A.N, dtype=np.int64)
    for s in range(A.N):
        fresh = (current != 0) & (delays == UNREACHABLE)
        delays[fresh] = s
        current = _saturated_matmul(current, A.entries)

    return DelayMatrix(entries=delays)


def transpose_graph(A: AdjacencyMatrix) -> AdjacencyMatrix:
    """
    Reverses every arrow of the graph.
    """
    return AdjacencyMatrix(entries=A.entries.T)


def from_edges(N: int, edges: Iterable[Tuple[int, int]]) -> AdjacencyMatrix:
    """
    Builds an adjacency matrix from zero-based ``(source, target)`` arrows plus one loop per node.
    """
    entries = np.eye(N, dtype=np.int64)
    for source, target in edges:
        if not (0 <= source < N and 0 <= target < N):
            raise ValueError("Edge ({}, {}) outside a graph of {} nodes.".format(source, target, N))
        entries[target, source] += 1
    return AdjacencyMatrix(entries=entries)


def star_table(A: AdjacencyMatrix, s: int) -> str:
    """
    Renders pattern(A, s) with ``*`` for positive entries and ``0`` elsewhere.
    """
    mask = pattern(A, s)
    return "\n".join(" ".join("*" if x else "0" for x in row) for row in mask)
