"""
Tests analytic stationary costs.
"""

import numpy as np
import pytest

from lqgraph.exceptions import DimensionError, InstabilityError
from lqgraph.simkit import analytic_cost, expand_node_weight


def test_scalar_cost():
    assert analytic_cost(0.5, 1.0, 1.0) == pytest.approx(4 / 3, abs=1.e-11)
    assert analytic_cost(0.5, 1.0, 2.0) == pytest.approx(16 / 3, abs=1.e-10)
    assert analytic_cost(0.0, [[1.0, 1.0]], 1.0) == pytest.approx(2.0)


def test_unstable_cost():
    with pytest.raises(InstabilityError):
        analytic_cost(1.1, 1.0, 1.0)


def test_expand_node_weight():
    assert expand_node_weight(None, [1, 1]) is None

    W = np.array([[2.0, 0.5], [0.5, 1.0]])
    assert np.array_equal(expand_node_weight(W, [1, 1]), W)

    big = expand_node_weight(W, [2, 2])
    assert big.shape == (4, 4)
    assert np.array_equal(big, np.kron(W, np.eye(2)))

    with pytest.raises(DimensionError):
        expand_node_weight(W, [1, 2, 1])
