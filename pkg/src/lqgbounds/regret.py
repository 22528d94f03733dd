"""Cumulative cost, optimal cost and regret estimates.

Two estimators of the same regret are provided.  ``regret_direct`` subtracts
the optimal expected cost from the realized cost.  ``regret_representation``
sums the Bellman gap ``(u - K xhat)' (B'PB + R) (u - K xhat)`` along the
trajectory, which has the same expectation and far smaller variance.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput
from .model import LqgInstance, PolicySpec, Trajectory, simulate_batch


class RegretMethod(str, enum.Enum):
    DIRECT = "Direct"
    REPRESENTATION = "Representation"


@dataclass(frozen=True)
class RegretEstimate:
    value: float
    std_error: float
    n_rollouts: int
    horizon: int
    method: RegretMethod
    samples: np.ndarray = field(repr=False, compare=False, default=None)


def _quad(v, M):
    # batched v' M v over the last axis
    return np.einsum("...i,ij,...j->...", v, M, v)


def trajectory_cost(traj: Trajectory, Q, R, Q_T=None):
    """Sum of x'Qx + u'Ru over t < T plus the terminal x_T' Q_T x_T.

    Returns a float for a single trajectory, an array for a batch.
    """
    Q = np.atleast_2d(Q)
    R = np.atleast_2d(R)
    running = _quad(traj.x[..., :-1, :], Q).sum(axis=-1) + _quad(traj.u, R).sum(axis=-1)
    if Q_T is not None:
        running = running + _quad(traj.x[..., -1, :], np.atleast_2d(Q_T))
    return running if traj.batched else float(running)


def optimal_cost(inst: LqgInstance, T: int) -> float:
    """Expected cost of the optimal policy over T steps with terminal weight P.

    Equals tr(P Sigma_x0) + T tr(Sigma_nu P) + T tr(Q Xi), where Xi is the
    posterior error covariance (zero under state feedback).
    """
    if T < 1:
        raise InvalidInput("horizon must be at least 1")
    P = inst.P
    return float(
        np.trace(P @ inst.Sigma_x0) + T * np.trace(inst.Sigma_nu @ P) + T * np.trace(inst.Q @ inst.filter.Xi)
    )


def bellman_gap(inst: LqgInstance, x, u):
    """(u - K x)' (B'PB + R) (u - K x), vectorized over leading axes."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if u.ndim == 0:
        u = u.reshape(1)
    resid = u - x @ inst.K.T
    gap = _quad(resid, inst.bellman_weight)
    return float(gap) if np.ndim(gap) == 0 else gap


def _summary(samples, T, method):
    samples = np.asarray(samples, dtype=float)
    n = samples.size
    se = float(samples.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return RegretEstimate(float(samples.mean()), se, n, T, method, samples)


def direct_samples(inst: LqgInstance, traj: Trajectory) -> np.ndarray:
    T = traj.horizon
    return np.atleast_1d(trajectory_cost(traj, inst.Q, inst.R, inst.P)) - optimal_cost(inst, T)


def representation_samples(inst: LqgInstance, traj: Trajectory) -> np.ndarray:
    return np.atleast_1d(bellman_gap(inst, traj.xhat[..., :-1, :], traj.u).sum(axis=-1))


def regret_direct(inst: LqgInstance, policy: PolicySpec, T: int, n_rollouts: int, seed: int,
                  traj: Trajectory | None = None) -> RegretEstimate:
    """Monte Carlo mean of realized cost minus the optimal expected cost."""
    traj = simulate_batch(inst, policy, T, n_rollouts, seed) if traj is None else traj
    return _summary(direct_samples(inst, traj), T, RegretMethod.DIRECT)


def regret_representation(inst: LqgInstance, policy: PolicySpec, T: int, n_rollouts: int, seed: int,
                          traj: Trajectory | None = None) -> RegretEstimate:
    """Monte Carlo mean of the summed Bellman gap over t = 0..T-1."""
    traj = simulate_batch(inst, policy, T, n_rollouts, seed) if traj is None else traj
    return _summary(representation_samples(inst, traj), T, RegretMethod.REPRESENTATION)


def paired_regret(inst: LqgInstance, policy: PolicySpec, T: int, n_rollouts: int, seed: int):
    """Both estimators on shared rollouts plus the SE of their per-rollout difference."""
    traj = simulate_batch(inst, policy, T, n_rollouts, seed)
    direct = regret_direct(inst, policy, T, n_rollouts, seed, traj=traj)
    rep = regret_representation(inst, policy, T, n_rollouts, seed, traj=traj)
    diff = direct.samples - rep.samples
    se_diff = float(diff.std(ddof=1) / np.sqrt(diff.size)) if diff.size > 1 else 0.0
    return direct, rep, se_diff
