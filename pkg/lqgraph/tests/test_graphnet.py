"""
Tests adjacency powers, delay matrices and sparsity patterns.
"""

import numpy as np
import pytest
from pydantic import ValidationError

from lqgraph import graphnet, testing
from lqgraph.graphnet import UNREACHABLE, AdjacencyMatrix

CHAIN = AdjacencyMatrix(entries=[[1, 1, 0], [0, 1, 1], [0, 0, 1]])
CYCLE = AdjacencyMatrix(entries=[[1, 1, 0], [0, 1, 1], [1, 0, 1]])


def _brute_force_delays(A):
    # Breadth-first search over the arrows j -> i
    N = A.N
    ret = np.full((N, N), UNREACHABLE)
    for j in range(N):
        ret[j, j] = 0
        frontier, seen, depth = {j}, {j}, 0
        while frontier:
            depth += 1
            frontier = {i for i in range(N) for k in frontier if A.entries[i, k] > 0 and i not in seen}
            for i in frontier:
                ret[i, j] = depth
            seen |= frontier
    return ret


# yapf: disable
@pytest.mark.parametrize("A, s, expected", [
    (CHAIN, 0, [[1, 0, 0], [0, 1, 0], [0, 0, 1]]),
    (CHAIN, 1, [[1, 1, 0], [0, 1, 1], [0, 0, 1]]),
    (CHAIN, 2, [[1, 2, 1], [0, 1, 2], [0, 0, 1]]),
    (CYCLE, 2, [[1, 2, 1], [1, 1, 2], [2, 1, 1]]),
])
# yapf: enable
def test_power(A, s, expected):
    assert np.array_equal(graphnet.power(A, s), expected)


def test_power_saturates():
    A = AdjacencyMatrix(entries=np.full((3, 3), 5))
    ret = graphnet.power(A, 200)
    assert np.all(ret == graphnet.SATURATION_CAP)
    assert np.array_equal(ret != 0, graphnet.pattern(A, 200))


def test_power_negative():
    with pytest.raises(ValueError):
        graphnet.power(CHAIN, -1)


def test_delay_matrix_chain():
    delays = graphnet.delay_matrix(CHAIN)
    assert np.array_equal(delays.entries, [[0, 1, 2], [UNREACHABLE, 0, 1], [UNREACHABLE, UNREACHABLE, 0]])
    assert delays.to_table() == [["0", "1", "2"], ["inf", "0", "1"], ["inf", "inf", "0"]]
    assert delays.get(1, 0) is None
    assert delays.max_finite() == 2


def test_delay_matrix_cycle():
    delays = graphnet.delay_matrix(CYCLE)
    assert np.array_equal(delays.entries, [[0, 1, 2], [2, 0, 1], [1, 2, 0]])
    assert delays.reachable().all()


@pytest.mark.parametrize("A", [CHAIN, CYCLE, testing.chain_graph(5), testing.cycle_graph(6)])
def test_delay_matrix_brute_force(A):
    assert np.array_equal(graphnet.delay_matrix(A).entries, _brute_force_delays(A))


def test_delay_matrix_identity_graph():
    delays = graphnet.delay_matrix(AdjacencyMatrix(entries=np.eye(4, dtype=int)))
    assert np.array_equal(delays.reachable(), np.eye(4, dtype=bool))


def test_pattern():
    assert np.array_equal(graphnet.pattern(CHAIN, 1), CHAIN.support)
    assert graphnet.pattern(CYCLE, 3).all()
    assert graphnet.pattern(CYCLE, 100).all()

    # Supports only grow
    for s in range(4):
        assert np.all(graphnet.pattern(CHAIN, s) <= graphnet.pattern(CHAIN, s + 1))


def test_transpose_graph():
    rev = graphnet.transpose_graph(CHAIN)
    assert np.array_equal(rev.entries, [[1, 0, 0], [1, 1, 0], [0, 1, 1]])

    delays = graphnet.delay_matrix(CYCLE).entries
    assert np.array_equal(graphnet.delay_matrix(graphnet.transpose_graph(CYCLE)).entries, delays.T)


def test_from_edges():
    assert CHAIN.same_structure(testing.chain_graph(3))
    assert CYCLE.same_structure(testing.cycle_graph(3))

    with pytest.raises(ValueError):
        graphnet.from_edges(3, [(0, 3)])


def test_star_table():
    assert graphnet.star_table(CHAIN, 1) == "* * 0\n0 * *\n0 0 *"
    assert graphnet.star_table(CYCLE, 2) == "* * *\n* * *\n* * *"


# yapf: disable
@pytest.mark.parametrize("entries", [
    [[0, 1], [0, 1]],
    [[1, -1], [0, 1]],
    [[1, 0, 0], [0, 1, 0]],
])
# yapf: enable
def test_adjacency_validation(entries):
    with pytest.raises(ValidationError):
        AdjacencyMatrix(entries=entries)


def test_adjacency_rejects_fractions():
    with pytest.raises(ValidationError):
        AdjacencyMatrix(entries=[[1.5, 0], [0, 1]])


def test_same_structure():
    doubled = AdjacencyMatrix(entries=2 * CHAIN.entries)
    assert doubled.same_structure(CHAIN)
    assert not CHAIN.same_structure(CYCLE)


@pytest.mark.parametrize("N", [2, 4, 6, 8])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_delays_match_powers(N, seed):
    A = testing.random_graph(N, np.random.default_rng(seed))
    delays = graphnet.delay_matrix(A).entries
    reached = delays != UNREACHABLE

    for k in range(N + 2):
        within = reached & (delays <= k)
        assert np.array_equal(graphnet.power(A, k) != 0, within)
        assert np.array_equal(graphnet.pattern(A, k), within)


@pytest.mark.parametrize("N", [3, 5, 8])
@pytest.mark.parametrize("density", [0.15, 0.4])
def test_delay_triangle_inequality(N, density):
    A = testing.random_graph(N, np.random.default_rng(N), density)
    d = graphnet.delay_matrix(A).entries
    assert np.array_equal(d, _brute_force_delays(A))

    for i in range(N):
        for j in range(N):
            for k in range(N):
                if d[i, j] == UNREACHABLE or d[j, k] == UNREACHABLE:
                    continue
                # k reaches j and j reaches i, so k reaches i no later
                assert d[i, k] != UNREACHABLE
                assert d[i, k] <= d[i, j] + d[j, k]
