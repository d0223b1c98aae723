"""
Tests feedback/feedforward transforms and controllers built from dual estimators.
"""

import numpy as np
import pytest

from lqgraph import kalman, series, testing
from lqgraph.duality import (controller_impulse_response, dual_estimator_to_controller, dual_problem,
                             feedback_to_feedforward, feedforward_to_feedback, synthesize_controller)
from lqgraph.exceptions import DimensionError, LawViolationError
from lqgraph.graphnet import AdjacencyMatrix, transpose_graph
from lqgraph.lifting import lift
from lqgraph.series import MatrixSeries
from lqgraph.sysmodel import ProblemKind, ProblemSpec, adjacency_of, dualize
from lqgraph.testing import mark_slow

SCALAR_LAW = AdjacencyMatrix(entries=[[1]])


def _constant_gain(k, T):
    return series.from_lag(np.array([[k]]), 0, (1, ), (1, ), T, SCALAR_LAW)


def test_feedforward_scalar_closed_form():
    a, k, T = 0.5, -0.3, 12
    G = feedback_to_feedforward(_constant_gain(k, T), [[a]], [[1.0]])
    assert np.allclose(G.coeffs[:, 0, 0], -k * (a + k)**np.arange(T + 1))


def test_round_trip_scalar():
    a, k, T = 0.5, -0.3, 12
    G = feedback_to_feedforward(_constant_gain(k, T), [[a]], [[1.0]])
    K = feedforward_to_feedback(G, [[a]], [[1.0]])

    assert K[0][0, 0] == pytest.approx(k, abs=1.e-14)
    assert np.allclose(K.coeffs[1:T - 1], 0.0, atol=1.e-14)


def test_round_trip_random_chain(rng):
    law = testing.chain_graph(3)
    sys = testing.random_control_system(law, rng, n_dims=[2, 1, 2], m_dims=[1, 1, 2])
    T = 8
    K = series.scale(series.random_series(law, sys.m_dims, sys.n_dims, T, rng), 0.3)

    G = feedback_to_feedforward(K, sys.A, sys.B)
    assert series.membership(G, law)

    K_back = feedforward_to_feedback(G, sys.A, sys.B)
    scale = max(1.0, np.max(np.abs(G.coeffs)))
    assert np.max(np.abs(K_back.coeffs[:T - 1] - K.coeffs[:T - 1])) / scale <= 1.e-10


def test_transform_errors(rng):
    law = testing.chain_graph(3)
    K = series.random_series(law, (1, 1, 1), (1, 1, 1), 4, rng)
    with pytest.raises(DimensionError):
        feedback_to_feedforward(K, np.eye(2), np.eye(3))

    with pytest.raises(ValueError):
        feedback_to_feedforward(K.without_law(), np.eye(3), np.eye(3))

    coeffs = np.array(K.coeffs)
    coeffs[1, 2, 0] = 1.0
    rogue = MatrixSeries(coeffs=coeffs, row_dims=K.row_dims, col_dims=K.col_dims)
    with pytest.raises(LawViolationError):
        feedback_to_feedforward(rogue, np.eye(3), np.eye(3), law=law)
    with pytest.raises(LawViolationError):
        feedforward_to_feedback(rogue, np.eye(3), np.eye(3), law=law)


def _dual_pieces(sys, T):
    dual_lift = lift(dualize(sys))
    filters = kalman.synthesize_all(dual_lift)
    l = kalman.assemble_estimator(filters, dual_lift, T)
    controller = dual_estimator_to_controller(filters, dual_lift)
    return dual_lift, filters, l, controller


def test_controller_is_transposed_estimator(rng):
    sys = testing.random_control_system(testing.chain_graph(3), rng)
    T = 20
    _, _, l, controller = _dual_pieces(sys, T)
    g = controller_impulse_response(controller, T)

    assert max(np.linalg.norm(g[s] - l[s].T) for s in range(T + 1)) <= 1.e-10
    assert series.membership(g, testing.chain_graph(3), 1.e-10)


def test_controller_structure(chain_control_system):
    dual_lift, filters, _, controller = _dual_pieces(chain_control_system, 10)

    assert controller.N == 3
    assert controller.memory == dual_lift.memory
    assert controller.order == 3 * dual_lift.n_e
    assert controller.law.same_structure(adjacency_of(chain_control_system))
    assert controller.output_rows(0)[0] == (0, 0, slice(0, 1))

    # u_2 never reads w_1
    g = controller_impulse_response(controller, 10)
    assert np.all(g.coeffs[:, 1, 0] == 0.0)

    with pytest.raises(DimensionError):
        dual_estimator_to_controller(filters[:2], dual_lift)


def test_synthesize_controller(chain_control_system):
    controller = synthesize_controller(chain_control_system)
    assert controller.u_dims == chain_control_system.m_dims
    assert controller.w_dims == chain_control_system.n_dims

    with pytest.raises(ValueError):
        synthesize_controller(chain_control_system.with_noise(np.diag([4.0, 1.0, 1.0])))


def test_impulse_response_horizon(chain_control_system):
    controller = synthesize_controller(chain_control_system)
    with pytest.raises(ValueError):
        controller_impulse_response(controller, 0)


def test_dual_problem(chain_system):
    p = ProblemSpec(kind=ProblemKind.estimation, system=chain_system)
    d = dual_problem(p)

    assert d.kind == ProblemKind.feedforward
    assert adjacency_of(d.system).same_structure(transpose_graph(adjacency_of(chain_system)))

    back = dual_problem(d)
    assert back.kind == ProblemKind.estimation
    assert np.array_equal(back.system.A, chain_system.A)

    with pytest.raises(ValueError):
        dual_problem(ProblemSpec(kind=ProblemKind.state_feedback, system=chain_system))


def test_cycle_controller_is_transposed_estimator():
    sys = testing.random_control_system(testing.cycle_graph(3), np.random.default_rng(4))
    T = 15
    _, _, l, controller = _dual_pieces(sys, T)
    g = controller_impulse_response(controller, T)

    assert max(np.max(np.abs(g[s] - l[s].T)) for s in range(T + 1)) <= 1.e-10
    assert series.membership(g, testing.cycle_graph(3), 1.e-10)
    assert controller.law.same_structure(testing.cycle_graph(3))


@mark_slow
@pytest.mark.parametrize("graph", [testing.chain_graph(3), testing.cycle_graph(3)])
def test_round_trip_many(graph):
    rng = np.random.default_rng(50)
    T = 8
    for _ in range(50):
        sys = testing.random_control_system(graph, rng)
        K = series.scale(series.random_series(graph, sys.m_dims, sys.n_dims, T, rng), 0.3)

        G = feedback_to_feedforward(K, sys.A, sys.B)
        assert series.membership(G, graph)
        K_back = feedforward_to_feedback(G, sys.A, sys.B)
        assert np.max(np.abs(K_back.coeffs[:T - 1] - K.coeffs[:T - 1])) <= 1.e-9
