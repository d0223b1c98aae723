"""
Monte-Carlo simulation of distributed estimators and feedforward controllers.

Trial k draws its noise from ``numpy.random.default_rng(SeedSequence(seed).spawn(trials)[k])``, so every trial
stream depends on the seed and the trial index only, not on batching. Stationary averages drop the first half
of the horizon as burn-in.
"""

import logging
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import Field
from tqdm import tqdm

from ..config import DEFAULT_SEED
from ..duality import ControllerRealization
from ..kalman import FilterRealization, run_node_filter
from ..lifting import LiftedSystem, selector
from ..models import ProtoModel
from ..sysmodel import BlockSystem
from ..team import TeamGainSchedule, TeamSystem, combine_estimates, run_team_estimator
from ..util import block_slices, psd_sqrt

__all__ = [
    "SimReport", "trial_streams", "draw_noise", "lifted_trajectory", "simulate_estimator", "simulate_closed_loop",
    "simulate_team", "innovation_whiteness"
]

logger = logging.getLogger(__name__)


class SimReport(ProtoModel):
    """
    Long-run average costs estimated by simulation.
    """
    trials: int = Field(..., description="Number of independent trials.")
    horizon: int = Field(..., description="Time steps per trial.")
    seed: int = Field(..., description="Root seed of the trial streams.")
    node_costs: Tuple[float, ...] = Field(..., description="Mean squared error (or output) per node.")
    total_cost: float = Field(..., description="Sum of the node costs.")
    stderr: float = Field(..., description="Standard deviation of the per-trial total cost over sqrt(trials).")
    node_stderr: Tuple[float, ...] = Field(..., description="Standard error of every node cost.")
    diverged: bool = Field(False, description="True when a realization was unstable or a trajectory blew up.")
    step_costs: Tuple[float, ...] = Field((), description="Mean total cost at every step t = 1..T.")

    def to_frame(self) -> pd.DataFrame:
        """
        One row per node plus a total row.
        """
        index = ["node {}".format(i + 1) for i in range(len(self.node_costs))] + ["total"]
        return pd.DataFrame({
            "cost": list(self.node_costs) + [self.total_cost],
            "stderr": list(self.node_stderr) + [self.stderr]
        },
                            index=index)

    def step_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": np.arange(1, len(self.step_costs) + 1), "cost": self.step_costs})


def trial_streams(seed: int, trials: int) -> List[np.random.Generator]:
    return [np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(trials)]


def draw_noise(rngs: Sequence[np.random.Generator], T: int, cov: np.ndarray) -> np.ndarray:
    """
    (trials, T, dim) Gaussian samples with covariance ``cov``, one stream per trial.
    """
    root = psd_sqrt(cov)
    return np.stack([rng.standard_normal((T, cov.shape[0])) for rng in rngs]) @ root.T


def lifted_trajectory(L: LiftedSystem, noise: np.ndarray, drive: Optional[np.ndarray] = None) -> np.ndarray:
    """
    x_e(0..T) from x_e(0) = 0 under ``noise`` of shape (..., T, m), plus an optional known drive (..., T, n_e).
    """
    T = noise.shape[-2]
    ret = np.zeros(noise.shape[:-2] + (T + 1, L.n_e))
    for t in range(T):
        ret[..., t + 1, :] = ret[..., t, :] @ L.A_e.T + noise[..., t, :] @ L.B_e.T
        if drive is not None:
            ret[..., t + 1, :] += drive[..., t, :]
    return ret


def _batches(trials: int, batch_size: int):
    for start in range(0, trials, batch_size):
        yield start, min(start + batch_size, trials)


def _stderr(samples: np.ndarray) -> float:
    if samples.shape[0] < 2:
        return 0.0
    return float(np.std(samples, ddof=1) / np.sqrt(samples.shape[0]))


def _report(per_trial: np.ndarray, steps: np.ndarray, T: int, seed: int, diverged: bool) -> SimReport:
    # per_trial: (trials, N) averages after burn-in, steps: (T,) mean total cost per step
    totals = per_trial.sum(axis=1)
    if not np.all(np.isfinite(totals)):
        diverged = True
    return SimReport(trials=per_trial.shape[0],
                     horizon=T,
                     seed=seed,
                     node_costs=tuple(float(x) for x in per_trial.mean(axis=0)),
                     total_cost=float(totals.mean()),
                     stderr=_stderr(totals),
                     node_stderr=tuple(_stderr(per_trial[:, i]) for i in range(per_trial.shape[1])),
                     diverged=diverged,
                     step_costs=tuple(float(x) for x in steps))


def _check_run(T: int, trials: int):
    if T < 1 or trials < 1:
        raise ValueError("Horizon and trials must be at least 1, found T={} and trials={}.".format(T, trials))


def simulate_estimator(L: LiftedSystem,
                       filters: Sequence[FilterRealization],
                       T: int,
                       trials: int,
                       seed: int = DEFAULT_SEED,
                       known_input: Optional[np.ndarray] = None,
                       input_matrix: Optional[np.ndarray] = None,
                       batch_size: int = 200,
                       progress: bool = False) -> SimReport:
    """
    Runs the plant and every node filter from zero state and averages E||x_i(t) - x_hat_i(t)||^2.

    A ``known_input`` u(t) of shape (T, k) drives the plant through ``input_matrix`` (n x k) and every filter
    propagates it through its mean, leaving the error statistics unchanged.
    """
    _check_run(T, trials)
    if len(filters) != L.N:
        raise ValueError("Expected {} filters, found {}.".format(L.N, len(filters)))

    sys = L.base
    cov = sys.noise_covariance(sys.m)
    drive = None
    if known_input is not None:
        if input_matrix is None:
            raise ValueError("A known input needs its input matrix.")
        drive = np.zeros((T, L.n_e))
        drive[:, :sys.n] = np.asarray(known_input, dtype=float)[:T] @ np.asarray(input_matrix, dtype=float).T

    diverged = any(not f.stabilizing for f in filters)
    if diverged:
        logger.warning("Simulating a non-stabilizing estimator; costs will not settle.")

    burn = T // 2
    rngs = trial_streams(seed, trials)
    per_trial = np.zeros((trials, L.N))
    steps = np.zeros(T)
    for start, stop in tqdm(list(_batches(trials, batch_size)), disable=not progress, desc="estimator trials"):
        noise = draw_noise(rngs[start:stop], T, cov)
        x_e = lifted_trajectory(L, noise, drive)

        sq = np.zeros((stop - start, T, L.N))
        for i, f in enumerate(filters):
            est, _ = run_node_filter(L, i, f, x_e, noise, drive=drive)
            Gamma = selector(L, i)
            err = (x_e[:, 1:, :] - est[:, 1:, :]) @ Gamma.T
            sq[:, :, i] = np.sum(err**2, axis=-1)

        per_trial[start:stop] = sq[:, burn:, :].mean(axis=1)
        steps += sq.sum(axis=2).sum(axis=0)

    return _report(per_trial, steps / trials, T, seed, diverged)


def simulate_closed_loop(sys: BlockSystem,
                         controller: Optional[ControllerRealization],
                         T: int,
                         trials: int,
                         seed: int = DEFAULT_SEED,
                         batch_size: int = 200,
                         progress: bool = False) -> SimReport:
    """
    Runs x(t+1) = A x + B u + w with u the summed node controller outputs and averages E||z_i(t)||^2.

    Without a controller the plant runs open loop.
    """
    _check_run(T, trials)
    cov = sys.noise_covariance(sys.n)
    if controller is not None and (controller.u_dims != sys.m_dims or controller.w_dims != sys.n_dims):
        raise ValueError("Controller dimensions do not match the plant.")

    us = block_slices(sys.m_dims)
    ws = block_slices(sys.n_dims)
    zs = block_slices(sys.p_dims)
    diverged = False
    if controller is not None:
        diverged = any(np.max(np.abs(np.linalg.eigvals(c.F)), initial=0.0) >= 1.0 for c in controller.nodes)

    burn = T // 2
    rngs = trial_streams(seed, trials)
    per_trial = np.zeros((trials, sys.N))
    steps = np.zeros(T)
    for start, stop in tqdm(list(_batches(trials, batch_size)), disable=not progress, desc="closed-loop trials"):
        noise = draw_noise(rngs[start:stop], T, cov)
        batch = stop - start

        x = np.zeros((batch, sys.n))
        states = [] if controller is None else [np.zeros((batch, c.F.shape[0])) for c in controller.nodes]
        outputs = [] if controller is None else [np.zeros((batch, T + 1, c.H.shape[0])) for c in controller.nodes]
        sq = np.zeros((batch, T, sys.N))
        for t in range(T + 1):
            u = np.zeros((batch, sys.m))
            if controller is not None:
                for i, ctrl in enumerate(controller.nodes):
                    outputs[i][:, t, :] = states[i] @ ctrl.H.T
                    for j, delay, rows in controller.output_rows(i):
                        if t - delay >= 0:
                            u[:, us[j]] += outputs[i][:, t - delay, rows]

            if t >= 1:
                z = x @ sys.C.T + u @ sys.D.T
                for i, sl in enumerate(zs):
                    sq[:, t - 1, i] = np.sum(z[:, sl]**2, axis=-1)
            if t == T:
                break

            x = x @ sys.A.T + u @ sys.B.T + noise[:, t, :]
            if controller is not None:
                for i, ctrl in enumerate(controller.nodes):
                    states[i] = states[i] @ ctrl.F.T + noise[:, t, ws[i]] @ ctrl.G_in.T

        per_trial[start:stop] = sq[:, burn:, :].mean(axis=1)
        steps += sq.sum(axis=2).sum(axis=0)

    return _report(per_trial, steps / trials, T, seed, diverged)


def innovation_whiteness(innovations: np.ndarray, max_lag: int = 5, burn: int = 0) -> Tuple[np.ndarray, float]:
    """
    Largest normalized autocorrelation over channels at lags 1..max_lag, and the 4/sqrt(samples) bound.

    ``innovations`` has shape (trials, T, channels). Channels without variance (exactly re-read registers) are
    skipped.
    """
    data = innovations[:, burn:, :]
    var = np.mean(data**2, axis=(0, 1))
    live = var > 1.e-12 * max(float(np.max(var, initial=0.0)), 1.e-300)
    data = data[:, :, live]
    var = var[live]

    rho = np.zeros(max_lag)
    for k in range(1, max_lag + 1):
        cross = np.mean(data[:, k:, :] * data[:, :-k, :], axis=(0, 1))
        rho[k - 1] = float(np.max(np.abs(cross / var), initial=0.0))

    samples = data.shape[0] * (data.shape[1] - max_lag)
    return rho, 4.0 / np.sqrt(samples)


def simulate_team(team: TeamSystem,
                  gains: Union[TeamGainSchedule, Sequence[np.ndarray]],
                  T: int,
                  trials: int,
                  seed: int = DEFAULT_SEED,
                  batch_size: int = 200,
                  progress: bool = False) -> SimReport:
    """
    Runs the team estimator along simulated trajectories and averages its W-weighted error.

    Node i is charged the row sum sum_j W_ij (x_i - x_i_check)^T (x_j - x_j_check).
    """
    _check_run(T, trials)
    L = team.lift
    W = team.weight.W
    cov = L.base.noise_covariance(L.base.m)

    burn = T // 2
    rngs = trial_streams(seed, trials)
    per_trial = np.zeros((trials, team.N))
    steps = np.zeros(T)
    for start, stop in tqdm(list(_batches(trials, batch_size)), disable=not progress, desc="team trials"):
        noise = draw_noise(rngs[start:stop], T, cov)
        x_e = lifted_trajectory(L, noise)
        checks = combine_estimates(run_team_estimator(team, gains, x_e, noise), L)

        errors = [x_e[:, 1:, :] @ selector(L, i).T - checks[i][:, 1:, :] for i in range(team.N)]
        node = np.zeros((stop - start, T, team.N))
        for i in range(team.N):
            for j in range(team.N):
                node[:, :, i] += W[i, j] * np.sum(errors[i] * errors[j], axis=-1)

        per_trial[start:stop] = node[:, burn:, :].mean(axis=1)
        steps += node.sum(axis=2).sum(axis=0)

    diverged = isinstance(gains, TeamGainSchedule) and gains.diverged
    return _report(per_trial, steps / trials, T, seed, diverged)
