"""
Weighted distributed estimation as a dynamic team problem.

Every node gets its own copy of the lifted state, X = diag(x_e, ..., x_e), and its own measurement column,
Y = diag(E_1 x_e + D_1 w, ..., E_N x_e + D_N w). A single gain K(t) acting on all columns minimizes the
W-weighted error Tr E{X~ W X~^T}, while the block-diagonal shape of Y keeps every column on its own node's
information.
"""

import logging
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from pydantic import Field, field_validator, model_validator
from tqdm import tqdm

from .exceptions import DimensionError
from .lifting import LiftedSystem, measurement_map, selector
from .models import FloatArray, ProblemKind, ProtoModel
from .sysmodel import ProblemSpec, dualize
from .util import RANK_TOL, is_spd, psd_pinv, psd_sqrt, symmetrize

__all__ = [
    "TeamWeight", "TeamSystem", "TeamGainSchedule", "static_team_gain", "build_team_lift", "team_filter_iterate",
    "team_cost", "combine_estimates", "run_team_estimator", "correlated_to_weighted"
]

logger = logging.getLogger(__name__)


class TeamWeight(ProtoModel):
    """
    Symmetric positive definite N x N coupling weight between node errors.
    """
    W: FloatArray = Field(..., description="N x N symmetric positive definite weight.")

    @field_validator("W")
    @classmethod
    def check_spd(cls, v):
        if not is_spd(v):
            raise ValueError("Team weight must be symmetric positive definite.")
        return v

    @property
    def N(self) -> int:
        return self.W.shape[0]

    @property
    def is_diagonal(self) -> bool:
        return bool(np.all(self.W == np.diag(np.diag(self.W))))

    def expand(self, n_dims: Sequence[int]) -> np.ndarray:
        """
        The state-space weight W (x) I of a plant whose nodes share one state dimension.
        """
        if len(n_dims) != self.N:
            raise DimensionError("Weight covers {} nodes, partition has {}.".format(self.N, len(n_dims)))
        if len(set(n_dims)) != 1:
            raise DimensionError("Expanding a node weight needs uniform node dimensions, found {}.".format(n_dims))
        return np.kron(self.W, np.eye(n_dims[0]))


class TeamSystem(ProtoModel):
    """
    Block-diagonal team matrices built from a lift.
    """
    lift: LiftedSystem = Field(..., description="The lift every node copy runs on.")
    weight: TeamWeight = Field(..., description="Coupling weight of the node errors.")
    A_team: FloatArray = Field(..., description="diag(A_e, ..., A_e).")
    B_team: FloatArray = Field(..., description="diag(B_e, ..., B_e).")
    C_team: FloatArray = Field(..., description="diag(E_1, ..., E_N).")
    D_team: FloatArray = Field(..., description="diag(D_e1, ..., D_eN).")
    noise_weight: FloatArray = Field(..., description="E{W_noise W W_noise^T} = W (x) noise covariance.")

    @model_validator(mode="after")
    def check_team(self):
        N, n_e, m = self.lift.N, self.lift.n_e, self.lift.base.m
        rows = sum(self.lift.rows(i) for i in range(N))
        if self.weight.N != N:
            raise ValueError("Weight covers {} nodes, lift has {}.".format(self.weight.N, N))
        expected = {
            "A_team": (N * n_e, N * n_e),
            "B_team": (N * n_e, N * m),
            "C_team": (rows, N * n_e),
            "D_team": (rows, N * m),
            "noise_weight": (N * m, N * m)
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ValueError("{} has shape {}, expected {}.".format(name, getattr(self, name).shape, shape))
        return self

    @property
    def N(self) -> int:
        return self.lift.N

    def row_slices(self) -> List[slice]:
        """
        Rows of Y (and columns of K) belonging to every node.
        """
        ret, start = [], 0
        for i in range(self.N):
            ret.append(slice(start, start + self.lift.rows(i)))
            start += self.lift.rows(i)
        return ret

    def state_slices(self) -> List[slice]:
        n_e = self.lift.n_e
        return [slice(i * n_e, (i + 1) * n_e) for i in range(self.N)]


class TeamGainSchedule(ProtoModel):
    """
    Time-varying team gains K(0..T-1) with the error moments Sigma_W(0..T) they produce.
    """
    gains: Tuple[FloatArray, ...] = Field(..., description="K(t), (N n_e) x (sum of node measurement rows).")
    moments: Tuple[FloatArray, ...] = Field(..., description="Sigma_W(t) = E{X~(t) W X~(t)^T}, from t = 0.")
    costs: Tuple[float, ...] = Field(..., description="W-weighted state error cost at every t.")
    residuals: Tuple[float, ...] = Field(..., description="max |K(t) - K(t-1)| for t >= 1.")
    stationary: bool = Field(..., description="True when the gain change fell below the tolerance.")
    stationary_index: Optional[int] = Field(None, description="First t at which the gain was declared stationary.")
    diverged: bool = Field(False, description="True when the recursion produced non-finite values.")
    tol: float = Field(..., description="Gain-change tolerance used for the stationarity test.")

    @property
    def T(self) -> int:
        return len(self.gains)

    @property
    def stationary_gain(self) -> Optional[np.ndarray]:
        return self.gains[-1] if self.stationary else None

    def gain_at(self, t: int) -> np.ndarray:
        """
        K(t), continued by the stationary gain past the end of a stationary schedule.
        """
        if t < self.T:
            return self.gains[t]
        if self.stationary:
            return self.gains[-1]
        raise IndexError("Schedule covers t < {}, requested {}.".format(self.T, t))


def static_team_gain(Sxy: np.ndarray, Syy: np.ndarray, rank_tol: float = RANK_TOL) -> np.ndarray:
    """
    The minimizer K* = Sxy Syy^+ of the static team problem.
    """
    Sxy = np.asarray(Sxy, dtype=float)
    Syy = np.asarray(Syy, dtype=float)
    if not (np.all(np.isfinite(Sxy)) and np.all(np.isfinite(Syy))):
        raise ValueError("Team moments must be finite.")
    return Sxy @ psd_pinv(Syy, rank_tol)


def build_team_lift(L: LiftedSystem, W: Union[TeamWeight, np.ndarray]) -> TeamSystem:
    if not isinstance(W, TeamWeight):
        W = TeamWeight(W=W)
    if W.N != L.N:
        raise DimensionError("Weight covers {} nodes, lift has {}.".format(W.N, L.N))

    E, D = zip(*[measurement_map(L, i) for i in range(L.N)])
    noise = L.base.noise_covariance(L.base.m)
    return TeamSystem(lift=L,
                      weight=W,
                      A_team=np.kron(np.eye(L.N), L.A_e),
                      B_team=np.kron(np.eye(L.N), L.B_e),
                      C_team=scipy.linalg.block_diag(*E),
                      D_team=scipy.linalg.block_diag(*D),
                      noise_weight=np.kron(W.W, noise))


def team_filter_iterate(team: TeamSystem,
                        T: int,
                        tol: float = 1.e-9,
                        stop_when_stationary: bool = False,
                        rank_tol: float = RANK_TOL,
                        progress: bool = False) -> TeamGainSchedule:
    """
    Runs the W-weighted second-moment recursion from Sigma_W(0) = 0 for up to T steps.

        Syy = C Sigma C^T + D What D^T,    Sxy = A Sigma C^T + B What D^T,    K = Sxy Syy^+
        Sigma+ = (A - K C) Sigma (A - K C)^T + (B - K D) What (B - K D)^T
    """
    if T < 1:
        raise ValueError("Team horizon must be at least 1, found {}.".format(T))

    A, B, C, D, What = team.A_team, team.B_team, team.C_team, team.D_team, team.noise_weight
    BWD = B @ What @ D.T
    DWD = D @ What @ D.T
    BWB = B @ What @ B.T

    sigma = np.zeros_like(A)
    gains, moments, costs, residuals = [], [sigma], [team_cost(team, sigma)], []
    stationary, stationary_index, diverged = False, None, False
    for t in tqdm(range(T), disable=not progress, desc="team recursion"):
        K = static_team_gain(A @ sigma @ C.T + BWD, C @ sigma @ C.T + DWD, rank_tol)
        closed = A - K @ C
        sigma = symmetrize(closed @ sigma @ closed.T + BWB - K @ BWD.T - BWD @ K.T + K @ DWD @ K.T)
        if not np.all(np.isfinite(sigma)):
            logger.warning("Team recursion diverged at step {}.".format(t))
            diverged = True
            break

        if gains:
            residuals.append(float(np.max(np.abs(K - gains[-1]))) if K.size else 0.0)
        gains.append(K)
        moments.append(sigma)
        costs.append(team_cost(team, sigma))

        if residuals and residuals[-1] < tol and not stationary:
            stationary, stationary_index = True, t
            logger.debug("Team gain stationary at step {} (residual {:.3e}).".format(t, residuals[-1]))
            if stop_when_stationary:
                break

    if stop_when_stationary and not stationary and not diverged:
        logger.warning("Team recursion did not reach a stationary gain in {} steps.".format(T))

    return TeamGainSchedule(gains=tuple(gains),
                            moments=tuple(moments),
                            costs=tuple(costs),
                            residuals=tuple(residuals),
                            stationary=stationary,
                            stationary_index=stationary_index,
                            diverged=diverged,
                            tol=tol)


def _stacked_selector(team: TeamSystem) -> np.ndarray:
    return np.hstack([selector(team.lift, i) for i in range(team.N)])


def team_cost(team: TeamSystem, sigma: np.ndarray) -> float:
    """
    sum_ij W_ij E{(x_i - x_i_check)^T (x_j - x_j_check)} from the moment Sigma_W.

    Needs uniform node state dimensions unless W is diagonal.
    """
    n_dims = team.lift.base.n_dims
    if len(set(n_dims)) == 1:
        Phi = _stacked_selector(team)
        return float(np.trace(Phi @ sigma @ Phi.T))

    if not team.weight.is_diagonal:
        raise DimensionError("A coupled weight needs uniform node state dimensions, found {}.".format(n_dims))
    cost = 0.0
    for i, sl in enumerate(team.state_slices()):
        Gamma = selector(team.lift, i)
        cost += float(np.trace(Gamma @ sigma[sl, sl] @ Gamma.T))
    return cost


def combine_estimates(X_hat: np.ndarray, L: LiftedSystem) -> List[np.ndarray]:
    """
    Node estimates x_i_check = sum_j Gamma_j X_hat_ji from a team estimate of shape (..., N n_e, N).
    """
    N, n_e = L.N, L.n_e
    if X_hat.shape[-2:] != (N * n_e, N):
        raise DimensionError("Team estimate has trailing shape {}, expected {}.".format(X_hat.shape[-2:],
                                                                                        (N * n_e, N)))
    if len(set(L.base.n_dims)) != 1:
        raise DimensionError("Combining team estimates needs uniform node state dimensions.")

    ret = []
    for i in range(N):
        acc = 0.0
        for j in range(N):
            acc = acc + X_hat[..., j * n_e:(j + 1) * n_e, i] @ selector(L, j).T
        ret.append(acc)
    return ret


def run_team_estimator(team: TeamSystem, schedule: Union[TeamGainSchedule, Sequence[np.ndarray]],
                       lifted_states: np.ndarray, noise: np.ndarray) -> np.ndarray:
    """
    Runs X_hat(t+1) = A X_hat(t) + K(t) (Y(t) - C X_hat(t)) from X_hat(0) = 0.

    Column i of X_hat is node i's copy, driven by its own measurements only. ``lifted_states`` has shape
    (..., T+1, n_e) and ``noise`` shape (..., T, m); returns (..., T+1, N n_e, N). A plain list of gains is
    continued by its last entry.
    """
    if isinstance(schedule, TeamGainSchedule):
        gain_at = schedule.gain_at
    else:
        gains = list(schedule)

        def gain_at(t):
            return gains[min(t, len(gains) - 1)]

    L = team.lift
    T = noise.shape[-2]
    batch = noise.shape[:-2]
    rows = team.row_slices()

    X_hat = np.zeros(batch + (T + 1, team.N * L.n_e, team.N))
    for t in range(T):
        Y = np.zeros(batch + (team.C_team.shape[0], team.N))
        for i in range(team.N):
            E_i, D_ei = measurement_map(L, i)
            Y[..., rows[i], i] = lifted_states[..., t, :] @ E_i.T + noise[..., t, :] @ D_ei.T
        innov = Y - team.C_team @ X_hat[..., t, :, :]
        X_hat[..., t + 1, :, :] = team.A_team @ X_hat[..., t, :, :] + gain_at(t) @ innov

    return X_hat


def correlated_to_weighted(p: ProblemSpec) -> ProblemSpec:
    """
    Turns state feedback under disturbances w ~ N(0, W) into weighted estimation of the dual system.

    Writing the disturbance as W^(1/2) w with w white moves W^(1/2) onto the dual estimation error, so the dual
    problem carries W as its cost weight and white noise.
    """
    if p.kind != ProblemKind.correlated_feedback:
        raise ValueError("Expected a correlated_feedback problem, found '{}'.".format(p.kind.value))

    W = np.asarray(p.system.noise_cov, dtype=float)
    if not is_spd(W):
        raise ValueError("Disturbance covariance must be positive definite.")

    return ProblemSpec(kind=ProblemKind.weighted_estimation,
                       system=dualize(p.system.with_noise(None)),
                       weight=W,
                       weight_root=psd_sqrt(W),
                       options=p.options)
