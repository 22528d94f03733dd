"""Fisher information of closed-loop trajectories and the Van Trees toolkit."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidInput, InvalidPrior, NondegeneracyViolated, WrongMode
from .model import (
    LqgInstance,
    Parametrization,
    PolicySpec,
    Trajectory,
    evaluate,
    jacobian_abc,
    simulate_batch,
    split_jacobian,
)

_CHUNK = 20_000


class InfoKind(str, enum.Enum):
    STATE_FEEDBACK_EXACT = "StateFeedbackExact"
    OUTPUT_UPPER_BOUND = "OutputUpperBound"
    SCORE_ORACLE = "ScoreOracle"
    OPTIMAL_POLICY_PER_STEP = "OptimalPolicyPerStep"


@dataclass(frozen=True)
class InformationMatrix:
    """Mean information with entrywise standard errors.

    ``samples`` holds the per-rollout matrices (shape ``(n, d, d)``) for
    Monte Carlo kinds, so paired comparisons can be made on shared rollouts.
    """

    matrix: np.ndarray
    horizon: int
    n_rollouts: int
    kind: InfoKind
    std_error: np.ndarray | None = None
    samples: np.ndarray | None = field(default=None, repr=False, compare=False)


def _sym(M):
    return 0.5 * (M + np.swapaxes(M, -1, -2))


def _aggregate(samples, T, kind) -> InformationMatrix:
    samples = _sym(samples)
    n = samples.shape[0]
    mean = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros_like(mean)
    return InformationMatrix(_sym(mean), T, n, kind, se, samples)


def _precision(M, name):
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise NondegeneracyViolated(f"{name} must be positive definite") from exc
    prec = np.linalg.inv(M)
    return 0.5 * (prec + prec.T)


def _sandwich(J, second_moment, prec):
    """J' (second_moment kron prec) J, batched over leading axes of second_moment."""
    d = J.shape[1]
    if d == 0:
        return np.zeros(second_moment.shape[:-2] + (0, 0))
    big = np.einsum("...ij,kl->...ikjl", second_moment, prec)
    m, p = second_moment.shape[-1], prec.shape[0]
    big = big.reshape(second_moment.shape[:-2] + (m * p, m * p))
    return np.einsum("ai,...ab,bj->...ij", J, big, J)


def _state_input_moments(traj: Trajectory):
    z = np.concatenate([traj.x[..., :-1, :], traj.u], axis=-1)
    return np.einsum("...ti,...tj->...ij", z, z)


def _trajectories(inst, policy, T, n_rollouts, seed, traj):
    return simulate_batch(inst, policy, T, n_rollouts, seed) if traj is None else traj


def sf_information(inst: LqgInstance, p: Parametrization, policy: PolicySpec, T: int, n_rollouts: int,
                   seed: int, traj: Trajectory | None = None) -> InformationMatrix:
    """Monte Carlo mean of sum_t J' (z_t z_t' kron Sigma_w^-1) J with z_t = (x_t, u_t)."""
    if not inst.state_feedback:
        raise WrongMode("sf_information needs a state-feedback instance")
    traj = _trajectories(inst, policy, T, n_rollouts, seed, traj)
    J_ab, _ = split_jacobian(jacobian_abc(p), inst.d_x, inst.d_u)
    samples = _sandwich(J_ab, _state_input_moments(traj), _precision(inst.Sigma_w, "Sigma_w"))
    return _aggregate(samples, traj.horizon, InfoKind.STATE_FEEDBACK_EXACT)


def po_information_upper(inst: LqgInstance, p: Parametrization, policy: PolicySpec, T: int, n_rollouts: int,
                         seed: int, traj: Trajectory | None = None) -> InformationMatrix:
    """Transition term plus output term ``J_C' (x_t x_t' kron Sigma_v^-1) J_C``."""
    if inst.state_feedback:
        raise WrongMode("po_information_upper needs a partially observed instance")
    traj = _trajectories(inst, policy, T, n_rollouts, seed, traj)
    J_ab, J_c = split_jacobian(jacobian_abc(p), inst.d_x, inst.d_u)
    transition = _sandwich(J_ab, _state_input_moments(traj), _precision(inst.Sigma_w, "Sigma_w"))
    xs = traj.x[..., :-1, :]
    state_moment = np.einsum("...ti,...tj->...ij", xs, xs)
    output = _sandwich(J_c, state_moment, _precision(inst.Sigma_v, "Sigma_v"))
    return _aggregate(transition + output, traj.horizon, InfoKind.OUTPUT_UPPER_BOUND)


def score_samples(inst: LqgInstance, p: Parametrization, traj: Trajectory, fd_step: float = 1e-6) -> np.ndarray:
    """Per-rollout score of the transition log-likelihood, shape ``(n, d_theta)``.

    Central differences through ``evaluate`` only; the Jacobian is never used.
    """
    prec = _precision(inst.Sigma_w, "Sigma_w")
    x_now, x_next, u = traj.x[..., :-1, :], traj.x[..., 1:, :], traj.u

    def loglik(theta):
        A, B, _ = evaluate(p, theta)
        resid = x_next - x_now @ A.T - u @ B.T
        return -0.5 * np.einsum("...ti,ij,...tj->...", resid, prec, resid)

    h = fd_step * (1.0 + np.linalg.norm(p.theta0))
    cols = []
    for j in range(p.d_theta):
        e = np.zeros(p.d_theta)
        e[j] = h
        cols.append((loglik(p.theta0 + e) - loglik(p.theta0 - e)) / (2.0 * h))
    if not cols:
        return np.zeros((traj.n_rollouts, 0))
    return np.stack(cols, axis=-1).reshape(traj.n_rollouts, p.d_theta)


def score_oracle_information(inst: LqgInstance, p: Parametrization, policy: PolicySpec, T: int,
                             n_rollouts: int, seed: int, fd_step: float = 1e-6,
                             traj: Trajectory | None = None) -> InformationMatrix:
    """Monte Carlo mean of the outer product of the trajectory score."""
    if not inst.state_feedback:
        raise WrongMode("the score oracle needs a state-feedback instance")
    traj = _trajectories(inst, policy, T, n_rollouts, seed, traj)
    score = score_samples(inst, p, traj, fd_step)
    return _aggregate(score[:, :, None] * score[:, None, :], traj.horizon, InfoKind.SCORE_ORACLE)


def stationary_state_input_moment(inst: LqgInstance) -> np.ndarray:
    """E z z' for z = (x, u) under the optimal policy in stationarity."""
    G = inst.gramian
    K = inst.K
    Xi = inst.filter.Xi
    top = np.hstack([G + Xi, G @ K.T])
    bottom = np.hstack([K @ G, K @ G @ K.T])
    return np.vstack([top, bottom])


def optimal_policy_information(inst: LqgInstance, p: Parametrization) -> InformationMatrix:
    """Analytic per-step expected information under the optimal policy."""
    J_ab, J_c = split_jacobian(jacobian_abc(p), inst.d_x, inst.d_u)
    info = _sandwich(J_ab, stationary_state_input_moment(inst), _precision(inst.Sigma_w, "Sigma_w"))
    if not inst.state_feedback:
        state_moment = inst.gramian + inst.filter.Xi
        info = info + _sandwich(J_c, state_moment, _precision(inst.Sigma_v, "Sigma_v"))
    return InformationMatrix(_sym(info), 1, 0, InfoKind.OPTIMAL_POLICY_PER_STEP)


# ---------------------------------------------------------------- Van Trees


@dataclass(frozen=True)
class Prior:
    """Density on ``[lower, upper]`` with its derivative."""

    density: Callable
    derivative: Callable | None
    lower: float
    upper: float

    def sample(self, n: int, rng: np.random.Generator, peak: float | None = None) -> np.ndarray:
        """Rejection sampling from the uniform envelope."""
        width = self.upper - self.lower
        if peak is None:
            grid = np.linspace(self.lower, self.upper, 2001)
            peak = 1.05 * float(np.max(self.density(grid)))
        out = np.empty(0)
        while out.size < n:
            cand = self.lower + width * rng.random(2 * n)
            keep = rng.random(2 * n) * peak <= self.density(cand)
            out = np.concatenate([out, cand[keep]])
        return out[:n]


def cosine_bump(center: float = 0.0, half_width: float = 1.0) -> Prior:
    """cos^2 bump supported on ``[center - w, center + w]``; its location integral is (pi/w)^2."""
    if half_width <= 0:
        raise InvalidPrior("half_width must be positive")
    c, w = float(center), float(half_width)
    k = np.pi / (2.0 * w)

    def density(x):
        x = np.asarray(x, dtype=float)
        inside = np.abs(x - c) <= w
        return np.where(inside, np.cos(k * (x - c)) ** 2 / w, 0.0)

    def derivative(x):
        x = np.asarray(x, dtype=float)
        inside = np.abs(x - c) <= w
        return np.where(inside, -k * np.sin(2.0 * k * (x - c)) / w, 0.0)

    return Prior(density, derivative, c - w, c + w)


def _composite_nodes(lower, upper, quadrature_n, panels):
    nodes, weights = np.polynomial.legendre.leggauss(quadrature_n)
    edges = np.linspace(lower, upper, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    xs = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    ws = (half[:, None] * weights[None, :]).ravel()
    return xs, ws


def location_integral(prior: Prior, quadrature_n: int = 32, panels: int = 16) -> float:
    """Integral of (lambda')^2 / lambda over the support (composite Gauss-Legendre)."""
    if quadrature_n < 1 or panels < 1:
        raise InvalidInput("need at least one node and one panel")
    xs, ws = _composite_nodes(prior.lower, prior.upper, quadrature_n, panels)
    dens = np.asarray(prior.density(xs), dtype=float)
    if np.any(dens < 0):
        raise InvalidPrior("prior density is negative somewhere")
    if prior.derivative is None:
        h = 1e-6 * max(1.0, prior.upper - prior.lower)
        deriv = (prior.density(xs + h) - prior.density(xs - h)) / (2.0 * h)
    else:
        deriv = np.asarray(prior.derivative(xs), dtype=float)
    integrand = np.divide(deriv ** 2, dens, out=np.zeros_like(dens), where=dens > 0)
    return float(np.sum(ws * integrand))


@dataclass(frozen=True)
class VanTreesResult:
    bayes_mse: float
    std_error: float
    bound: float
    n_samples: int

    @property
    def holds(self) -> bool:
        return self.bayes_mse + 3.0 * self.std_error >= self.bound


def van_trees_check(sigma: float, prior: Prior, n_samples: int, seed: int,
                    quadrature_n: int = 32, panels: int = 16) -> VanTreesResult:
    """Bayes risk of the posterior mean for y ~ N(theta, sigma^2) against 1/(1/sigma^2 + J)."""
    if sigma <= 0:
        raise InvalidInput("sigma must be positive")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), 0])))
    theta = prior.sample(n_samples, rng)
    y = theta + sigma * rng.standard_normal(n_samples)
    xs, ws = _composite_nodes(prior.lower, prior.upper, quadrature_n, panels)
    prior_w = ws * prior.density(xs)
    errors = np.empty(n_samples)
    for start in range(0, n_samples, _CHUNK):
        yy = y[start:start + _CHUNK, None]
        logl = -0.5 * ((yy - xs[None, :]) / sigma) ** 2
        logl -= logl.max(axis=1, keepdims=True)
        post = np.exp(logl) * prior_w[None, :]
        est = (post @ xs) / post.sum(axis=1)
        errors[start:start + _CHUNK] = (est - theta[start:start + _CHUNK]) ** 2
    J = location_integral(prior, quadrature_n, panels)
    return VanTreesResult(
        bayes_mse=float(errors.mean()),
        std_error=float(errors.std(ddof=1) / np.sqrt(n_samples)),
        bound=1.0 / (1.0 / sigma ** 2 + J),
        n_samples=n_samples,
    )
