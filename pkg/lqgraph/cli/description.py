"""
The system-description file: one JSON (or YAML) mapping holding a block system, its weight and its options.

Block keys are one-based: ``"A.i.j"`` (missing means zero), ``"B.i"`` and ``"C.i"`` (required for every node).
``"D"``, ``"W"``, ``"noise_cov"``, ``"kind"`` and ``"options"`` are optional; any other key is rejected.
"""

import re
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..config import SynthesisOptions
from ..exceptions import DescriptionParseError
from ..models import ProblemKind
from ..sysmodel import BlockSystem
from .cli_utils import read_config_file

__all__ = ["NodeDims", "SystemDescription", "parse_description", "load_description"]

_BLOCK_KEY = re.compile(r"^(?P<kind>[ABC])\.(?P<i>\d+)(\.(?P<j>\d+))?$")


class NodeDims(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n: List[int] = Field(..., description="State dimension of every node.")
    m: List[int] = Field(..., description="Input (or noise) dimension of every node.")
    p: List[int] = Field(..., description="Output dimension of every node.")


class SystemDescription(BaseModel):
    """
    The non-block part of a description file.
    """
    model_config = ConfigDict(extra="forbid")

    N: int = Field(..., description="Number of nodes.")
    dims: NodeDims = Field(..., description="Per-node dimensions.")
    kind: Optional[ProblemKind] = Field(None, description="Problem the system is posed for; selects rank checks.")
    D: Optional[List[List[float]]] = Field(None, description="p x m direct term, zero when absent.")
    W: Optional[List[List[float]]] = Field(None, description="Cost weight, N x N or n x n.")
    noise_cov: Optional[List[List[float]]] = Field(None, description="Disturbance covariance.")
    options: SynthesisOptions = Field(SynthesisOptions(), description="Synthesis options.")

    @model_validator(mode="after")
    def check_counts(self):
        if self.N < 1:
            raise ValueError("N must be at least 1.")
        for name in ("n", "m", "p"):
            dims = getattr(self.dims, name)
            if len(dims) != self.N or any(d < 0 for d in dims):
                raise ValueError("dims.{} must list {} nonnegative entries.".format(name, self.N))
        return self


def _numeric(key: str, value: Any) -> np.ndarray:
    try:
        return np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise DescriptionParseError("Entry '{}' is not a numeric matrix.".format(key))


def _matrix(key: str, value: Any, shape: Tuple[int, int]) -> np.ndarray:
    mat = _numeric(key, value)
    if mat.size == 0 and 0 in shape:
        mat = mat.reshape(shape)
    if mat.ndim == 1 and shape[0] == 1:
        mat = mat.reshape(1, -1)
    if mat.shape != shape:
        raise DescriptionParseError("Entry '{}' has shape {}, expected {}.".format(key, mat.shape, shape))
    return mat


def parse_description(data: Dict[str, Any]) -> Tuple[BlockSystem, SystemDescription]:
    """
    Builds the block system of a description mapping. Raises ``DescriptionParseError`` on any malformed entry.
    """
    blocks, rest = {}, {}
    for key, value in data.items():
        match = _BLOCK_KEY.match(str(key))
        if match:
            blocks[key] = (match, value)
        else:
            rest[key] = value

    try:
        desc = SystemDescription(**rest)
    except ValidationError as exc:
        raise DescriptionParseError("Invalid description: {}".format(exc))

    N, dims = desc.N, desc.dims
    A_blocks, B_blocks, C_blocks = {}, [None] * N, [None] * N
    for key, (match, value) in blocks.items():
        i = int(match.group("i")) - 1
        j = None if match.group("j") is None else int(match.group("j")) - 1
        kind = match.group("kind")
        if not (0 <= i < N) or (j is not None and not (0 <= j < N)):
            raise DescriptionParseError("Block key '{}' refers to a node outside 1..{}.".format(key, N))
        if (kind == "A") != (j is not None):
            raise DescriptionParseError("Block key '{}' is malformed.".format(key))

        if kind == "A":
            A_blocks[(i, j)] = _matrix(key, value, (dims.n[i], dims.n[j]))
        elif kind == "B":
            B_blocks[i] = _matrix(key, value, (dims.n[i], dims.m[i]))
        else:
            C_blocks[i] = _matrix(key, value, (dims.p[i], dims.n[i]))

    for name, found in (("B", B_blocks), ("C", C_blocks)):
        missing = ["{}.{}".format(name, i + 1) for i, b in enumerate(found) if b is None]
        if missing:
            raise DescriptionParseError("Missing block keys: {}.".format(", ".join(missing)))

    p, m, n = sum(dims.p), sum(dims.m), sum(dims.n)
    D = None if desc.D is None else _matrix("D", desc.D, (p, m))
    noise_cov = None
    if desc.noise_cov is not None:
        noise_cov = _numeric("noise_cov", desc.noise_cov)
        if noise_cov.ndim != 2 or noise_cov.shape[0] != noise_cov.shape[1]:
            raise DescriptionParseError("Entry 'noise_cov' must be a square matrix.")
    if desc.W is not None:
        W = _numeric("W", desc.W)
        if W.shape not in ((N, N), (n, n)):
            raise DescriptionParseError("Entry 'W' must be {0} x {0} or {1} x {1}.".format(N, n))

    try:
        sys = BlockSystem.from_blocks(A_blocks, B_blocks, C_blocks, D=D, noise_cov=noise_cov)
    except ValidationError as exc:
        raise DescriptionParseError("Description does not define a block system: {}".format(exc))

    return sys, desc


def load_description(path: str) -> Tuple[BlockSystem, SystemDescription]:
    return parse_description(read_config_file(path))
