"""
Tests Monte-Carlo simulation of estimators, controllers and teams.
"""

import numpy as np
import pytest
import scipy.linalg

from lqgraph import kalman, team
from lqgraph.duality import synthesize_controller
from lqgraph.lifting import lift
from lqgraph.simkit import (draw_noise, innovation_whiteness, lifted_trajectory, simulate_closed_loop,
                            simulate_estimator, simulate_team, trial_streams)
from lqgraph.sysmodel import BlockSystem, dualize
from lqgraph.testing import mark_slow


@pytest.fixture
def scalar_filters(scalar):
    L = lift(scalar, 1)
    return L, kalman.synthesize_all(L)


def test_trial_streams_reproducible():
    a = draw_noise(trial_streams(3, 4), 10, np.eye(2))
    b = draw_noise(trial_streams(3, 4), 10, np.eye(2))
    c = draw_noise(trial_streams(4, 4), 10, np.eye(2))

    assert a.shape == (4, 10, 2)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)

    # Trial k only depends on the seed and k
    assert np.array_equal(draw_noise(trial_streams(3, 6), 10, np.eye(2))[:4], a)


def test_draw_noise_covariance():
    cov = np.array([[2.0, 0.5], [0.5, 1.0]])
    noise = draw_noise(trial_streams(9, 200), 100, cov).reshape(-1, 2)
    assert np.allclose(noise.T @ noise / noise.shape[0], cov, atol=0.1)


def test_batch_size_independent(scalar_filters):
    L, filters = scalar_filters
    a = simulate_estimator(L, filters, T=40, trials=30, seed=5, batch_size=7)
    b = simulate_estimator(L, filters, T=40, trials=30, seed=5)

    assert a.trials == 30
    assert a.total_cost == pytest.approx(b.total_cost, rel=1.e-12)
    assert a.stderr == pytest.approx(b.stderr, rel=1.e-10)
    assert np.allclose(a.step_costs, b.step_costs, rtol=1.e-12)


def test_report_frames(scalar_filters):
    L, filters = scalar_filters
    report = simulate_estimator(L, filters, T=20, trials=5, seed=1)

    frame = report.to_frame()
    assert list(frame.index) == ["node 1", "total"]
    assert frame.loc["total", "cost"] == report.total_cost
    assert len(report.step_frame()) == 20
    assert not report.diverged


def test_simulate_errors(scalar_filters, chain_control_system):
    L, filters = scalar_filters
    with pytest.raises(ValueError):
        simulate_estimator(L, filters, T=0, trials=5)
    with pytest.raises(ValueError):
        simulate_estimator(L, filters * 2, T=10, trials=5)
    with pytest.raises(ValueError):
        simulate_estimator(L, filters, T=10, trials=5, known_input=np.ones((10, 1)))

    controller = synthesize_controller(chain_control_system)
    with pytest.raises(ValueError):
        simulate_closed_loop(dualize(chain_control_system), controller, T=10, trials=2)


def test_known_input(scalar_filters):
    L, filters = scalar_filters
    u = np.sin(np.arange(30))[:, None]
    a = simulate_estimator(L, filters, T=30, trials=10, seed=2)
    b = simulate_estimator(L, filters, T=30, trials=10, seed=2, known_input=u, input_matrix=[[1.0]])
    assert b.total_cost == pytest.approx(a.total_cost, rel=1.e-9)


def test_unstable_filter_flagged(scalar_filters):
    L, filters = scalar_filters
    bad = [filters[0].model_copy(update={"spectral_radius": 1.5})]
    assert simulate_estimator(L, bad, T=10, trials=2).diverged


def test_open_loop(chain_control_system):
    sys = chain_control_system
    report = simulate_closed_loop(sys, None, T=100, trials=200, seed=3)
    assert len(report.node_costs) == 3
    assert not report.diverged

    # With u = 0 every node pays the stationary variance of its own state
    sigma = kalman.lyapunov_iterate(sys.A, np.eye(sys.n))
    for i in range(3):
        assert report.node_costs[i] == pytest.approx(sigma[i, i], abs=4 * report.node_stderr[i])


def _scalar_regulator(a):
    # x+ = a x + u + w, z = (x, u)
    return BlockSystem.from_blocks({(0, 0): [[a]]}, [[[1.0]]], [[[1.0], [0.0]]], D=np.array([[0.0], [1.0]]))


def test_single_node_matches_lqr():
    a = 0.9
    sys = _scalar_regulator(a)
    P = scipy.linalg.solve_discrete_are(sys.A, sys.B, sys.C.T @ sys.C, sys.D.T @ sys.D, s=sys.C.T @ sys.D)
    assert P[0, 0] == pytest.approx((a**2 + np.sqrt(a**4 + 4)) / 2, rel=1.e-12)

    dual_lift = lift(dualize(sys))
    f = kalman.synthesize_node_filter(dual_lift, 0)
    _, cost = kalman.filter_error_covariance(f, dual_lift, 0)
    assert cost == pytest.approx(np.trace(P), rel=1.e-8)

    report = simulate_closed_loop(sys, synthesize_controller(sys), T=200, trials=400, seed=12)
    assert not report.diverged
    assert report.total_cost == pytest.approx(np.trace(P), abs=4 * report.stderr)


def test_innovation_whiteness(scalar_filters):
    L, filters = scalar_filters
    T = 100
    noise = draw_noise(trial_streams(17, 200), T, np.eye(2))
    x_e = lifted_trajectory(L, noise)

    _, innov = kalman.run_node_filter(L, 0, filters[0], x_e, noise)
    rho, bound = innovation_whiteness(innov, max_lag=5, burn=50)
    assert rho.shape == (5, )
    assert np.max(rho) < bound

    # A mistuned gain leaves correlated innovations behind
    slow = filters[0].model_copy(update={"G_in": 0.2 * filters[0].G_in})
    _, innov = kalman.run_node_filter(L, 0, slow, x_e, noise)
    rho, bound = innovation_whiteness(innov, max_lag=5, burn=50)
    assert rho[0] > bound


def test_team_simulation_reproducible(chain_system):
    L = lift(chain_system)
    ts = team.build_team_lift(L, np.eye(3))
    schedule = team.team_filter_iterate(ts, 30)

    a = simulate_team(ts, schedule, T=20, trials=6, seed=8)
    b = simulate_team(ts, schedule, T=20, trials=6, seed=8, batch_size=4)
    assert a.total_cost == pytest.approx(b.total_cost, rel=1.e-12)
    assert len(a.node_costs) == 3
    assert not a.diverged


@mark_slow
def test_scalar_monte_carlo(scalar_filters):
    L, filters = scalar_filters
    report = simulate_estimator(L, filters, T=200, trials=500)
    assert abs(report.total_cost - 1.132782) <= 3 * report.stderr


@mark_slow
def test_chain_monte_carlo(chain_system):
    L = lift(chain_system)
    filters = kalman.synthesize_all(L)
    expected = sum(kalman.filter_error_covariance(f, L, i)[1] for i, f in enumerate(filters))

    report = simulate_estimator(L, filters, T=100, trials=400)
    assert report.total_cost == pytest.approx(expected, rel=0.02)


@mark_slow
def test_closed_loop_matches_dual_costs(chain_control_system):
    dual_lift = lift(dualize(chain_control_system))
    filters = kalman.synthesize_all(dual_lift)
    expected = sum(kalman.filter_error_covariance(f, dual_lift, i)[1] for i, f in enumerate(filters))

    report = simulate_closed_loop(chain_control_system, synthesize_controller(chain_control_system), T=100,
                                  trials=400)
    open_loop = simulate_closed_loop(chain_control_system, None, T=100, trials=400)
    assert report.total_cost == pytest.approx(expected, rel=0.02)
    assert report.total_cost < open_loop.total_cost


@mark_slow
def test_team_monte_carlo(chain_system):
    W = np.array([[2.0, 0.5, 0.0], [0.5, 1.0, 0.0], [0.0, 0.0, 1.0]])
    ts = team.build_team_lift(lift(chain_system), W)
    schedule = team.team_filter_iterate(ts, 200)

    report = simulate_team(ts, schedule, T=100, trials=400)
    assert report.total_cost == pytest.approx(schedule.costs[-1], rel=0.03)
