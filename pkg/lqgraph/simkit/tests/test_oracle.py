"""
Tests the structured least-squares oracles.
"""

import numpy as np
import pytest

from lqgraph import series, testing
from lqgraph.kalman import riccati_iterate
from lqgraph.models import ProblemKind
from lqgraph.simkit import estimator_cost, feedforward_oracle, structured_ls_oracle
from lqgraph.sysmodel import ProblemSpec, dualize
from lqgraph.team import correlated_to_weighted

COUPLED = np.array([[2.0, 0.5, 0.0], [0.5, 1.0, 0.0], [0.0, 0.0, 1.0]])


def test_scalar_oracle(scalar):
    oracle = structured_ls_oracle(scalar, T=60)
    assert oracle.cost == pytest.approx(1.132782, abs=1.e-6)
    assert oracle.node_costs == pytest.approx((oracle.cost, ))
    assert not oracle.rank_deficient
    assert oracle.horizon == 60

    # The most recent coefficients follow the stationary predictor, l(s) = K (a - K)^s
    K = riccati_iterate(np.array([[0.5]]), np.array([[1.0]]), np.eye(1), np.eye(1)).K[0, 0]
    for s in range(6):
        assert oracle.coeffs[s][0, 0] == pytest.approx(K * (0.5 - K)**s, abs=1.e-9)


def test_oracle_respects_law(chain_system):
    oracle = structured_ls_oracle(chain_system, T=20)
    assert series.membership(oracle.coeffs, testing.chain_graph(3))
    assert sum(oracle.node_costs) == pytest.approx(oracle.cost)
    assert oracle.residual <= 1.e-8 * max(oracle.rhs_norm, 1.0)


def test_oracle_horizon(scalar):
    with pytest.raises(ValueError):
        structured_ls_oracle(scalar, T=0)
    with pytest.raises(ValueError):
        feedforward_oracle(scalar, T=0)


@pytest.mark.parametrize("name", ["chain_system", "cycle_system"])
def test_oracle_is_a_local_minimum(name, request, rng):
    sys = request.getfixturevalue(name)
    oracle = structured_ls_oracle(sys, T=20)
    assert estimator_cost(sys, oracle.coeffs) == pytest.approx(oracle.cost, rel=1.e-9)

    # Every free coordinate, nudged either way, can only make things worse
    allowed = np.argwhere(series.allowed_mask(oracle.coeffs.law, sys.n_dims, sys.p_dims, oracle.coeffs.T))
    picks = allowed[rng.choice(len(allowed), size=20, replace=False)]
    for s, r, c in picks:
        for step in (1.e-3, -1.e-3):
            coeffs = np.array(oracle.coeffs.coeffs)
            coeffs[s, r, c] += step
            nudged = series.MatrixSeries(coeffs=coeffs, row_dims=sys.n_dims, col_dims=sys.p_dims)
            assert estimator_cost(sys, nudged) >= oracle.cost - 1.e-10


def test_weighted_oracle(chain_system):
    W = COUPLED
    weighted = structured_ls_oracle(chain_system, weight=W, T=20)
    assert weighted.node_costs == ()
    assert estimator_cost(chain_system, weighted.coeffs, weight=W) == pytest.approx(weighted.cost, rel=1.e-9)

    # The unweighted optimum is feasible for the weighted problem
    plain = structured_ls_oracle(chain_system, T=20)
    assert weighted.cost <= estimator_cost(chain_system, plain.coeffs, weight=W) + 1.e-10


def test_feedforward_is_dual_estimation(chain_control_system):
    ff = feedforward_oracle(chain_control_system, T=30)
    est = structured_ls_oracle(dualize(chain_control_system), T=30)

    assert ff.cost == pytest.approx(est.cost, rel=1.e-8)
    assert ff.coeffs.row_dims == chain_control_system.m_dims
    assert np.allclose(ff.coeffs.coeffs, est.coeffs.coeffs.transpose(0, 2, 1), atol=1.e-8)
    assert series.membership(ff.coeffs, testing.chain_graph(3))


def test_correlated_feedforward_is_weighted_estimation(chain_control_system):
    p = ProblemSpec(kind=ProblemKind.correlated_feedback, system=chain_control_system.with_noise(COUPLED))
    weighted = correlated_to_weighted(p)

    ff = feedforward_oracle(chain_control_system, noise_cov=COUPLED, T=25)
    est = structured_ls_oracle(weighted.system, weight=weighted.weight, T=25)
    assert ff.node_costs == ()
    assert ff.cost == pytest.approx(est.cost, rel=1.e-6)
