"""
The lifted system: plant state stacked with shift registers of delayed outputs.

The extended state is x_e(t) = (x(t); y(t-1); ...; y(t-M)) and evolves as

    x_e(t+1) = A_e x_e(t) + B_e w(t)

with the outputs C x + D w entering the first register stage. Node i measures the pairs (j, k) with
k - 1 >= delay(i, j), where pair (j, k) reads y_j(t-k+1): lag 1 is the direct read C_jj x_j + D_j w and lag
k >= 2 reads register stage k-1.
"""

import logging
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import Field, model_validator

from .graphnet import AdjacencyMatrix, DelayMatrix, delay_matrix
from .models import FloatArray, ProblemKind, ProtoModel
from .sysmodel import BlockSystem, adjacency_of, validate
from .util import block_offsets

__all__ = ["LayoutBlock", "LiftedSystem", "lift", "measurement_map", "selector"]

logger = logging.getLogger(__name__)


class LayoutBlock(ProtoModel):
    """
    One named block of the extended state: x_j (lag 0) or y_j at register lag k.
    """
    name: str
    node: int
    lag: int
    start: int
    stop: int


class LiftedSystem(ProtoModel):
    """
    Extended dynamics (A_e, B_e) with per-node measurement maps and selectors.
    """
    base: BlockSystem = Field(..., description="The plant the lift was built from (estimation reading).")
    memory: int = Field(..., description="Number of register stages M.")
    law: AdjacencyMatrix = Field(..., description="Adjacency of the base plant.")
    delays: DelayMatrix = Field(..., description="Delay matrix of the base plant.")
    A_e: FloatArray = Field(..., description="Extended state matrix, (n + M p) x (n + M p).")
    B_e: FloatArray = Field(..., description="Extended noise input, (n + M p) x m.")
    E: Tuple[FloatArray, ...] = Field(..., description="Measurement map E_i of every node.")
    D_e: Tuple[FloatArray, ...] = Field(..., description="Direct noise term of every node's measurement.")
    Gamma: Tuple[FloatArray, ...] = Field(..., description="Selector of x_i inside x_e for every node.")
    pairs: Tuple[Tuple[Tuple[int, int], ...], ...] = Field(
        ..., description="Measured (node j, lag k) pairs of every node, zero-based j, in row order.")
    layout: Tuple[LayoutBlock, ...] = Field(..., description="Named blocks of the extended state.")

    @model_validator(mode="after")
    def check_maps(self):
        N = self.base.N
        if not (len(self.E) == len(self.D_e) == len(self.Gamma) == len(self.pairs) == N):
            raise ValueError("Every node needs a measurement map, noise term, selector and pair list.")
        n_e = self.A_e.shape[0]
        if self.A_e.shape != (n_e, n_e) or self.B_e.shape != (n_e, self.base.m):
            raise ValueError("Extended matrices have inconsistent shapes.")
        for i in range(N):
            if self.E[i].shape[1] != n_e or self.D_e[i].shape != (self.E[i].shape[0], self.base.m):
                raise ValueError("Measurement map of node {} has inconsistent shape.".format(i + 1))
            if self.Gamma[i].shape != (self.base.n_dims[i], n_e):
                raise ValueError("Selector of node {} has inconsistent shape.".format(i + 1))
        return self

    @property
    def N(self) -> int:
        return self.base.N

    @property
    def n_e(self) -> int:
        return self.A_e.shape[0]

    def rows(self, i: int) -> int:
        return self.E[i].shape[0]

    def pair_rows(self, i: int) -> List[Tuple[int, int, slice]]:
        """
        (j, k, row slice inside E_i) for every measured pair of node i.
        """
        ret = []
        start = 0
        for j, k in self.pairs[i]:
            stop = start + self.base.p_dims[j]
            ret.append((j, k, slice(start, stop)))
            start = stop
        return ret

    def register_slice(self, j: int, k: int) -> slice:
        """
        Columns of x_e holding y_j(t-k), 1 <= k <= M.
        """
        n = self.base.n
        off_p = block_offsets(self.base.p_dims)
        start = n + (k - 1) * self.base.p + int(off_p[j])
        return slice(start, start + self.base.p_dims[j])

    def layout_manifest(self) -> Dict[str, List[int]]:
        return {blk.name: [blk.start, blk.stop] for blk in self.layout}


def _layout(sys: BlockSystem, M: int) -> Tuple[LayoutBlock, ...]:
    ret = []
    off_n = block_offsets(sys.n_dims)
    for j in range(sys.N):
        ret.append(
            LayoutBlock(name="x{}".format(j + 1), node=j, lag=0, start=int(off_n[j]), stop=int(off_n[j + 1])))

    off_p = block_offsets(sys.p_dims)
    for k in range(1, M + 1):
        base = sys.n + (k - 1) * sys.p
        for j in range(sys.N):
            ret.append(
                LayoutBlock(name="y{}[t-{}]".format(j + 1, k),
                            node=j,
                            lag=k,
                            start=int(base + off_p[j]),
                            stop=int(base + off_p[j + 1])))
    return tuple(ret)


def lift(sys: BlockSystem, M: Optional[int] = None) -> LiftedSystem:
    """
    Builds the lifted system of ``sys`` with M register stages (default N).

    Raises if M cannot hold the longest finite information delay.
    """
    diagnostics = validate(sys, ProblemKind.estimation)
    if diagnostics:
        raise ValueError("Cannot lift an invalid system: {}".format("; ".join(diagnostics)))

    if M is None:
        M = sys.N
    if M < 1:
        raise ValueError("Memory must be at least 1, found {}.".format(M))

    law = adjacency_of(sys)
    delays = delay_matrix(law)
    if M < delays.max_finite() + 1:
        raise ValueError("Memory M={} cannot represent delay {}; need M >= {}.".format(
            M, delays.max_finite(), delays.max_finite() + 1))

    n, p, m = sys.n, sys.p, sys.m
    n_e = n + M * p

    A_e = np.zeros((n_e, n_e))
    A_e[:n, :n] = sys.A
    A_e[n:n + p, :n] = sys.C
    for k in range(1, M):
        rows = slice(n + k * p, n + (k + 1) * p)
        cols = slice(n + (k - 1) * p, n + k * p)
        A_e[rows, cols] = np.eye(p)

    B_e = np.zeros((n_e, m))
    B_e[:n] = sys.B
    B_e[n:n + p] = sys.D

    off_n = block_offsets(sys.n_dims)
    off_p = block_offsets(sys.p_dims)

    E, D_e, Gamma, pairs = [], [], [], []
    for i in range(sys.N):
        E_rows, D_rows, node_pairs = [], [], []
        for j in range(sys.N):
            d = delays.get(i, j)
            if d is None:
                continue
            for k in range(d + 1, M + 1):
                if sys.p_dims[j] == 0:
                    continue
                ysl = slice(int(off_p[j]), int(off_p[j + 1]))
                rows = np.zeros((sys.p_dims[j], n_e))
                if k == 1:
                    rows[:, :n] = sys.C[ysl, :]
                    D_rows.append(sys.D[ysl, :])
                else:
                    start = n + (k - 2) * p + int(off_p[j])
                    rows[:, start:start + sys.p_dims[j]] = np.eye(sys.p_dims[j])
                    D_rows.append(np.zeros((sys.p_dims[j], m)))
                E_rows.append(rows)
                node_pairs.append((j, k))

        E.append(np.vstack(E_rows) if E_rows else np.zeros((0, n_e)))
        D_e.append(np.vstack(D_rows) if D_rows else np.zeros((0, m)))
        pairs.append(tuple(node_pairs))

        sel = np.zeros((sys.n_dims[i], n_e))
        sel[:, int(off_n[i]):int(off_n[i + 1])] = np.eye(sys.n_dims[i])
        Gamma.append(sel)

        logger.debug("Node {} measures {} pairs ({} rows).".format(i + 1, len(node_pairs), E[-1].shape[0]))

    return LiftedSystem(base=sys,
                        memory=M,
                        law=law,
                        delays=delays,
                        A_e=A_e,
                        B_e=B_e,
                        E=tuple(E),
                        D_e=tuple(D_e),
                        Gamma=tuple(Gamma),
                        pairs=tuple(pairs),
                        layout=_layout(sys, M))


def _check_node(L: LiftedSystem, i: int):
    if not (0 <= i < L.N):
        raise IndexError("Node index {} outside [0, {}).".format(i, L.N))


def measurement_map(L: LiftedSystem, i: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    (E_i, D_e_i) of node i, rows ordered by node then lag.
    """
    _check_node(L, i)
    return L.E[i], L.D_e[i]


def selector(L: LiftedSystem, i: int) -> np.ndarray:
    """
    Gamma_i with Gamma_i x_e = x_i.
    """
    _check_node(L, i)
    return L.Gamma[i]
