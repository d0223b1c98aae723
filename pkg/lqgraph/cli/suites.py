"""
Executable property checks run by ``lqgraph verify``.

Every suite returns rows of (property, measured, threshold, passed).
"""

import logging
from typing import Any, Callable, Dict, List

import numpy as np
import pandas as pd

from .. import series
from ..config import SynthesisOptions
from ..duality import (controller_impulse_response, dual_estimator_to_controller, feedback_to_feedforward,
                       feedforward_to_feedback)
from ..graphnet import delay_matrix
from ..kalman import assemble_estimator, centralized_filter, filter_error_covariance, run_node_filter, synthesize_all
from ..lifting import lift
from ..models import ProblemKind
from ..simkit import (draw_noise, feedforward_oracle, innovation_whiteness, lifted_trajectory, structured_ls_oracle,
                      trial_streams)
from ..sysmodel import BlockSystem, adjacency_of, dualize, validate
from ..util import block_slices

__all__ = ["SUITES", "run_suite", "suite_frame"]

logger = logging.getLogger(__name__)


def _row(prop: str, measured: float, threshold: float, passed: bool = None) -> Dict[str, Any]:
    if passed is None:
        passed = bool(measured <= threshold)
    return {"property": prop, "measured": float(measured), "threshold": float(threshold), "passed": bool(passed)}


def _not_applicable(prop: str, diagnostics: List[str]) -> List[Dict[str, Any]]:
    for msg in diagnostics:
        logger.error(msg)
    return [_row(prop + " (invalid system)", np.inf, 0.0, False)]


def closure_suite(sys: BlockSystem, options: SynthesisOptions) -> List[Dict[str, Any]]:
    """
    Products and feedback loops of random law-respecting series stay inside the law, with exact zeros.
    """
    law = adjacency_of(sys)
    rng = np.random.default_rng(options.seed)
    T = min(options.horizon, 10)
    dims = sys.n_dims

    worst_product, worst_loop, worst_qi = 0.0, 0.0, 0.0
    for _ in range(options.closure_pairs):
        G1 = series.random_series(law, dims, dims, T, rng)
        G2 = series.random_series(law, dims, dims, T, rng)
        H1 = series.random_series(law, dims, dims, T, rng, strictly_causal=True)

        prod = series.multiply(G1.without_law(), G2.without_law())
        loop = series.feedback_inverse(G1.without_law(), H1.without_law())
        allowed = series.allowed_mask(law, dims, dims, T)
        worst_product = max(worst_product, float(np.max(np.abs(prod.coeffs[~allowed]), initial=0.0)))
        worst_loop = max(worst_loop, float(np.max(np.abs(loop.coeffs[~allowed]), initial=0.0)))
        worst_qi = max(worst_qi, series.quadratic_invariance_residual(G1, G2))

    delays = delay_matrix(law)
    logger.info("Delay table:\n{}".format(pd.DataFrame(delays.to_table()).to_string(header=False, index=False)))
    return [
        _row("product closure (max forbidden entry)", worst_product, 0.0),
        _row("feedback closure (max forbidden entry)", worst_loop, 0.0),
        _row("quadratic invariance residual", worst_qi, 0.0),
    ]


def duality_suite(sys: BlockSystem, options: SynthesisOptions, threads: int = 1) -> List[Dict[str, Any]]:
    """
    Feedback/feedforward round trip, g(s) = l(s)^T for the synthesized controller, and equal oracle costs.
    """
    diagnostics = validate(sys.with_noise(None), ProblemKind.feedforward, options.rank_tol)
    if diagnostics:
        return _not_applicable("duality", diagnostics)

    law = adjacency_of(sys)
    rng = np.random.default_rng(options.seed)
    T = min(options.horizon, 20)

    K = series.scale(series.random_series(law, sys.m_dims, sys.n_dims, T, rng), 0.3)
    G = feedback_to_feedforward(K, sys.A, sys.B)
    K_back = feedforward_to_feedback(G, sys.A, sys.B)
    scale = max(1.0, float(np.max(np.abs(G.coeffs))))
    round_trip = float(np.max(np.abs(K_back.coeffs[:T - 1] - K.coeffs[:T - 1]))) / scale

    dual_lift = lift(dualize(sys.with_noise(None)), options.memory)
    filters = synthesize_all(dual_lift, options.riccati_tol, options.riccati_max_iter, threads=threads)
    l = assemble_estimator(filters, dual_lift, options.horizon)
    g = controller_impulse_response(dual_estimator_to_controller(filters, dual_lift), options.horizon)
    transpose_err = max(float(np.linalg.norm(g[s] - l[s].T)) for s in range(options.horizon + 1))

    ff = feedforward_oracle(sys.with_noise(None), T=options.oracle_horizon, rank_tol=options.rank_tol)
    est = structured_ls_oracle(dualize(sys.with_noise(None)), T=options.oracle_horizon, rank_tol=options.rank_tol)
    cost_gap = abs(ff.cost - est.cost) / max(abs(est.cost), 1.e-300)

    return [
        _row("feedback -> feedforward -> feedback (relative)", round_trip, 1.e-10),
        _row("max_s ||g(s) - l(s)^T||_F", transpose_err, 1.e-8),
        _row("controller membership", 0.0 if series.membership(g, law, 1.e-10) else 1.0, 0.0),
        _row("feedforward vs dual estimation oracle cost (relative)", cost_gap, 1.e-8),
    ]


def optimality_suite(sys: BlockSystem, options: SynthesisOptions, threads: int = 1) -> List[Dict[str, Any]]:
    """
    Per-node Kalman costs against the structured least-squares oracle and the centralized lower bound.
    """
    diagnostics = validate(sys, ProblemKind.estimation, options.rank_tol)
    if diagnostics:
        return _not_applicable("optimality", diagnostics)

    L = lift(sys, options.memory)
    filters = synthesize_all(L, options.riccati_tol, options.riccati_max_iter, threads=threads)
    oracle = structured_ls_oracle(sys, T=options.oracle_horizon, rank_tol=options.rank_tol)
    central = centralized_filter(sys, options.riccati_tol, options.riccati_max_iter)

    rows = []
    for i, (f, sl) in enumerate(zip(filters, block_slices(sys.n_dims))):
        _, cost = filter_error_covariance(f, L, i, tol=options.lyapunov_tol)
        gap = abs(cost - oracle.node_costs[i]) / max(abs(oracle.node_costs[i]), 1.e-300)
        floor = float(np.trace(central.P[sl, sl]))
        rows.append(_row("node {} Kalman vs oracle (relative)".format(i + 1), gap, 1.e-6))
        rows.append(_row("node {} cost above centralized bound".format(i + 1), floor - cost, 1.e-9))
    return rows


def whiteness_suite(sys: BlockSystem, options: SynthesisOptions, threads: int = 1) -> List[Dict[str, Any]]:
    """
    Lag 1..5 normalized innovation autocorrelations of every node filter.
    """
    diagnostics = validate(sys, ProblemKind.estimation, options.rank_tol)
    if diagnostics:
        return _not_applicable("whiteness", diagnostics)

    L = lift(sys, options.memory)
    filters = synthesize_all(L, options.riccati_tol, options.riccati_max_iter, threads=threads)
    T = options.sim_horizon
    noise = draw_noise(trial_streams(options.seed, options.trials), T, sys.noise_covariance(sys.m))
    x_e = lifted_trajectory(L, noise)

    rows = []
    for i, f in enumerate(filters):
        _, innov = run_node_filter(L, i, f, x_e, noise)
        rho, bound = innovation_whiteness(innov, max_lag=5, burn=T // 2)
        rows.append(_row("node {} max innovation autocorrelation".format(i + 1), float(np.max(rho)), bound))
    return rows


SUITES: Dict[str, Callable] = {
    "closure": lambda sys, options, threads=1: closure_suite(sys, options),
    "duality": duality_suite,
    "optimality": optimality_suite,
    "whiteness": whiteness_suite,
}


def run_suite(name: str, sys: BlockSystem, options: SynthesisOptions, threads: int = 1) -> List[Dict[str, Any]]:
    if name not in SUITES:
        raise KeyError("Suite '{}' not understood, expected one of {}.".format(name, sorted(SUITES)))
    return SUITES[name](sys, options, threads=threads)


def suite_frame(rows: List[Dict[str, Any]]) -> pd.DataFrame:
    return pd.DataFrame(rows, columns=["property", "measured", "threshold", "passed"])
