"""
Tests Riccati iterations and per-node Kalman synthesis on the lifted system.
"""

import logging

import numpy as np
import pytest
import scipy.linalg

from lqgraph import kalman, series, testing
from lqgraph.exceptions import InstabilityError, NonConvergenceError
from lqgraph.lifting import lift
from lqgraph.simkit import lifted_trajectory, structured_ls_oracle
from lqgraph.testing import mark_slow
from lqgraph.util import block_slices

P_SCALAR = (0.25 + np.sqrt(4.0625)) / 2
K_SCALAR = 0.5 * P_SCALAR / (P_SCALAR + 1)


def _one(x):
    return np.array([[x]], dtype=float)


def test_riccati_scalar():
    res = kalman.riccati_iterate(_one(0.5), _one(1.0), _one(1.0), _one(1.0))

    assert res.converged
    assert res.P[0, 0] == pytest.approx(P_SCALAR, abs=1.e-10)
    assert res.P[0, 0] == pytest.approx(1.132782, abs=1.e-6)
    assert res.K[0, 0] == pytest.approx(K_SCALAR, abs=1.e-10)
    assert res.K[0, 0] == pytest.approx(0.265564, abs=1.e-6)


def test_riccati_no_measurement():
    a = 0.8
    res = kalman.riccati_iterate(_one(a), _one(0.0), _one(1.0), _one(1.0))
    assert res.P[0, 0] == pytest.approx(1 / (1 - a**2), abs=1.e-9)
    assert res.K[0, 0] == 0.0


def test_riccati_matches_scipy(rng):
    A = rng.standard_normal((4, 4))
    A *= 0.9 / np.max(np.abs(np.linalg.eigvals(A)))
    C = rng.standard_normal((2, 4))
    Q = np.eye(4)
    R = np.eye(2)

    res = kalman.riccati_iterate(A, C, Q, R)
    ref = scipy.linalg.solve_discrete_are(A.T, C.T, Q, R)
    assert np.allclose(res.P, ref, atol=1.e-8)
    assert np.allclose(res.P, res.P.T, atol=1.e-10)
    assert np.min(np.linalg.eigvalsh(res.P)) > -1.e-10


def test_riccati_nonconvergence(caplog):
    with caplog.at_level(logging.WARNING, logger="lqgraph"):
        res = kalman.riccati_iterate(_one(0.5), _one(1.0), _one(1.0), _one(1.0), max_iter=2)

    assert not res.converged
    assert res.iterations == 2
    assert "did not converge" in caplog.text


def test_riccati_blowup():
    with pytest.raises(NonConvergenceError):
        kalman.riccati_iterate(_one(1.e200), _one(0.0), _one(1.0), _one(1.0), max_iter=5)


def test_riccati_schedule_converges():
    gains, covs = kalman.riccati_schedule(_one(0.5), _one(1.0), _one(1.0), _one(1.0), T=80)
    assert len(gains) == 80
    assert len(covs) == 81
    assert covs[0][0, 0] == 0.0
    assert covs[1][0, 0] == pytest.approx(1.0)
    assert covs[-1][0, 0] == pytest.approx(P_SCALAR, abs=1.e-12)


def test_lyapunov():
    sigma = kalman.lyapunov_iterate(_one(0.5), _one(1.0))
    assert sigma[0, 0] == pytest.approx(4 / 3, abs=1.e-11)

    with pytest.raises(InstabilityError):
        kalman.lyapunov_iterate(_one(1.0), _one(1.0))

    with pytest.raises(NonConvergenceError):
        kalman.lyapunov_iterate(_one(0.99), _one(1.0), max_iter=3)


def test_lyapunov_matches_scipy(rng):
    F = rng.standard_normal((5, 5))
    F *= 0.8 / np.max(np.abs(np.linalg.eigvals(F)))
    G = rng.standard_normal((5, 2))

    sigma = kalman.lyapunov_iterate(F, G @ G.T)
    assert np.allclose(sigma, scipy.linalg.solve_discrete_lyapunov(F, G @ G.T), atol=1.e-9)


def test_scalar_node_filter(scalar):
    L = lift(scalar, 1)
    f = kalman.synthesize_node_filter(L, 0)

    assert f.stabilizing
    assert f.riccati.converged
    assert (f.H @ f.riccati.P @ f.H.T)[0, 0] == pytest.approx(P_SCALAR, abs=1.e-9)

    _, cost = kalman.filter_error_covariance(f, L, 0)
    assert cost == pytest.approx(P_SCALAR, abs=1.e-9)
    assert cost == pytest.approx(1.132782, abs=1.e-6)


def test_noise_moments(chain_system):
    L = lift(chain_system)
    Q, R, S = kalman.noise_moments(L, 0)
    assert Q.shape == (L.n_e, L.n_e)
    assert R.shape == (L.rows(0), L.rows(0))
    assert S.shape == (L.n_e, L.rows(0))
    assert np.allclose(Q, L.B_e @ L.B_e.T)


def test_synthesize_all_order_and_threads(chain_system):
    L = lift(chain_system)
    serial = kalman.synthesize_all(L)
    threaded = kalman.synthesize_all(L, threads=3, order=[2, 0, 1])

    assert [f.node for f in threaded] == [0, 1, 2]
    for a, b in zip(serial, threaded):
        assert np.array_equal(a.G_in, b.G_in)
        assert np.array_equal(a.F, b.F)

    with pytest.raises(ValueError):
        kalman.synthesize_all(L, order=[0, 0, 1])


def test_chain_structure(chain_system):
    L = lift(chain_system)
    filters = kalman.synthesize_all(L)
    l = kalman.assemble_estimator(filters, L, 15)

    assert series.membership(l, L.law, 1.e-10)
    assert np.all(l.coeffs[:, 1, 0] == 0.0)
    assert l.block(0, 0, 2)[0, 0] == 0.0
    assert l.block(1, 0, 2)[0, 0] == 0.0
    assert l.block(2, 0, 2)[0, 0] != 0.0

    # Node 3 only ever sees y_3
    assert all(j == 2 for j, _ in filters[2].pairs)
    assert np.all(l.coeffs[:, 2, :2] == 0.0)


def test_random_chain_membership(rng):
    sys = testing.random_estimation_system(testing.chain_graph(4), rng, n_dims=[2, 1, 2, 1], p_dims=[1, 1, 2, 1])
    L = lift(sys)
    l = kalman.assemble_estimator(kalman.synthesize_all(L), L, 12)
    assert series.membership(l, testing.chain_graph(4), 1.e-10)


def test_assemble_errors(chain_system):
    L = lift(chain_system)
    filters = kalman.synthesize_all(L)
    with pytest.raises(ValueError):
        kalman.assemble_estimator(filters[:2], L, 5)
    with pytest.raises(ValueError):
        kalman.assemble_estimator(filters, L, 0)


@pytest.mark.parametrize("name", ["chain_system", "cycle_system"])
def test_node_costs_against_oracle(name, request):
    sys = request.getfixturevalue(name)
    L = lift(sys)
    filters = kalman.synthesize_all(L)
    oracle = structured_ls_oracle(sys, T=60)
    central = kalman.centralized_filter(sys)

    for i, (f, sl) in enumerate(zip(filters, block_slices(sys.n_dims))):
        _, cost = kalman.filter_error_covariance(f, L, i)
        assert cost == pytest.approx(oracle.node_costs[i], rel=1.e-6)
        assert cost >= np.trace(central.P[sl, sl]) - 1.e-9


def test_chain_node_filter_beats_random_filters(chain_system, rng):
    L = lift(chain_system)
    f = kalman.synthesize_node_filter(L, 0)
    _, best = kalman.filter_error_covariance(f, L, 0)

    E_0, D_0 = L.E[0], L.D_e[0]
    for _ in range(50):
        K = f.G_in + 0.05 * rng.standard_normal(f.G_in.shape)
        F = L.A_e - K @ E_0
        if np.max(np.abs(np.linalg.eigvals(F))) >= 1.0:
            continue
        G = L.B_e - K @ D_0
        sigma = kalman.lyapunov_iterate(F, G @ G.T)
        assert np.trace(f.H @ sigma @ f.H.T) >= best - 1.e-9


def test_unstable_filter_cost(chain_system):
    L = lift(chain_system)
    f = kalman.synthesize_node_filter(L, 0)
    unstable = f.model_copy(update={"spectral_radius": 1.5})
    with pytest.raises(InstabilityError):
        kalman.filter_error_covariance(unstable, L, 0)


def test_known_input_leaves_error_unchanged(scalar):
    L = lift(scalar, 1)
    f = kalman.synthesize_node_filter(L, 0)
    T = 30
    rng = np.random.default_rng(3)
    noise = rng.standard_normal((2, T, 2))
    drive = np.zeros((2, T, L.n_e))
    drive[:, :, 0] = rng.standard_normal((2, T))

    plain = lifted_trajectory(L, noise)
    driven = lifted_trajectory(L, noise, drive)
    est_plain, _ = kalman.run_node_filter(L, 0, f, plain, noise)
    est_driven, _ = kalman.run_node_filter(L, 0, f, driven, noise, drive=drive)
    assert np.allclose(plain - est_plain, driven - est_driven, atol=1.e-12)


@mark_slow
@pytest.mark.parametrize("graph", [testing.chain_graph(3), testing.cycle_graph(3)])
def test_node_costs_against_oracle_many(graph):
    rng = np.random.default_rng(20)
    for _ in range(20):
        sys = testing.random_estimation_system(graph, rng)
        L = lift(sys)
        oracle = structured_ls_oracle(sys, T=60)
        for i, f in enumerate(kalman.synthesize_all(L)):
            assert kalman.filter_error_covariance(f, L, i)[1] == pytest.approx(oracle.node_costs[i], rel=1.e-6)
