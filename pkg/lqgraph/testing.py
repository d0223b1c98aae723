"""
Contains testing infrastructure for lqgraph.
"""

from typing import Optional, Sequence

import numpy as np
import pytest
import scipy.linalg

from .cli.lqgraph_cli import main
from .data import get_system, get_system_path
from .graphnet import AdjacencyMatrix, from_edges
from .sysmodel import BlockSystem
from .util import block_slices, spectral_radius

### Generic helpers

mark_slow = pytest.mark.slow


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow", default=False):
        return

    skip_slow = pytest.mark.skip(reason="need --runslow option to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def run_cli(args: Sequence[str]) -> int:
    """
    Runs the lqgraph command line in-process and returns its exit code.
    """
    try:
        return main([str(x) for x in args])
    except SystemExit as exc:
        return int(exc.code or 0)


### Fixture builders


def chain_graph(N: int) -> AdjacencyMatrix:
    """
    Node j+1 feeds node j: x_j depends on x_(j+1).
    """
    return from_edges(N, [(j + 1, j) for j in range(N - 1)])


def cycle_graph(N: int) -> AdjacencyMatrix:
    """
    The chain closed by an arrow from node 1 to node N.
    """
    return from_edges(N, [(j + 1, j) for j in range(N - 1)] + [(0, N - 1)])


def random_graph(N: int, rng: np.random.Generator, density: float = 0.3) -> AdjacencyMatrix:
    """
    Loops plus arrows drawn independently with probability ``density``, edge multiplicities 1 or 2.
    """
    arrows = (rng.random((N, N)) < density) * rng.integers(1, 3, size=(N, N))
    np.fill_diagonal(arrows, 0)
    return AdjacencyMatrix(entries=np.eye(N, dtype=np.int64) + arrows)


def _stable_blocks(law: AdjacencyMatrix, n_dims: Sequence[int], rng: np.random.Generator, radius: float):
    n = int(sum(n_dims))
    A = np.zeros((n, n))
    rows = block_slices(n_dims)
    for i in range(law.N):
        for j in range(law.N):
            if law.support[i, j]:
                A[rows[i], rows[j]] = rng.standard_normal((n_dims[i], n_dims[j]))

    rho = spectral_radius(A)
    if rho > 0:
        A *= radius / rho
    return {(i, j): A[rows[i], rows[j]] for i in range(law.N) for j in range(law.N)}


def random_estimation_system(law: AdjacencyMatrix,
                             rng: np.random.Generator,
                             n_dims: Optional[Sequence[int]] = None,
                             p_dims: Optional[Sequence[int]] = None,
                             radius: float = 0.8) -> BlockSystem:
    """
    A random stable plant with process noise w_x (n_i per node) and measurement noise w_y (p_i per node).

    B_ii = [G_i 0] and D = [0 I] so every node sees noisy outputs y_i = C_ii x_i + w_yi.
    """
    N = law.N
    n_dims = [1] * N if n_dims is None else list(n_dims)
    p_dims = [1] * N if p_dims is None else list(p_dims)
    A_blocks = _stable_blocks(law, n_dims, rng, radius)

    B_blocks, C_blocks, D_blocks = [], [], []
    for n_i, p_i in zip(n_dims, p_dims):
        B_blocks.append(np.hstack([rng.standard_normal((n_i, n_i)) + 2 * np.eye(n_i), np.zeros((n_i, p_i))]))
        C_blocks.append(rng.standard_normal((p_i, n_i)) + np.eye(p_i, n_i))
        D_blocks.append(np.hstack([np.zeros((p_i, n_i)), np.eye(p_i)]))

    return BlockSystem.from_blocks(A_blocks, B_blocks, C_blocks, D=scipy.linalg.block_diag(*D_blocks))


def random_control_system(law: AdjacencyMatrix,
                          rng: np.random.Generator,
                          n_dims: Optional[Sequence[int]] = None,
                          m_dims: Optional[Sequence[int]] = None,
                          radius: float = 0.8) -> BlockSystem:
    """
    A random stable plant penalizing z_i = (x_i, u_i), so that C_ii = [I; 0] and D = [0; I] blockwise.
    """
    N = law.N
    n_dims = [1] * N if n_dims is None else list(n_dims)
    m_dims = [1] * N if m_dims is None else list(m_dims)
    A_blocks = _stable_blocks(law, n_dims, rng, radius)

    B_blocks, C_blocks, D_blocks = [], [], []
    for n_i, m_i in zip(n_dims, m_dims):
        B_blocks.append(rng.standard_normal((n_i, m_i)) + np.eye(n_i, m_i))
        C_blocks.append(np.vstack([np.eye(n_i), np.zeros((m_i, n_i))]))
        D_blocks.append(np.vstack([np.zeros((n_i, m_i)), np.eye(m_i)]))

    return BlockSystem.from_blocks(A_blocks, B_blocks, C_blocks, D=scipy.linalg.block_diag(*D_blocks))


def scalar_system(a: float = 0.5) -> BlockSystem:
    """
    x+ = a x + w_1, y = x + w_2 with unit noises.
    """
    return BlockSystem.from_blocks({(0, 0): [[a]]}, [[[1.0, 0.0]]], [[[1.0]]], D=np.array([[0.0, 1.0]]))


### Fixtures


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def chain_system():
    return get_system("chain")[0]


@pytest.fixture
def cycle_system():
    return get_system("cycle")[0]


@pytest.fixture
def chain_control_system():
    return get_system("chain_control")[0]


@pytest.fixture
def scalar():
    return get_system("scalar")[0]


@pytest.fixture
def system_path():
    return get_system_path
