"""LQG instances, parametrizations, policies and trajectory simulation.

A rollout draws its noise from its own Philox stream keyed by
``SeedSequence([seed, index])``, so a batch of rollouts gives the same
numbers whatever the batch size, and two policies run with the same seed
see identical disturbances.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable

import numpy as np

from . import riccati
from .errors import (
    InvalidDimensions,
    InvalidInput,
    InvalidInstance,
    InvalidTheta,
    NondegeneracyViolated,
)
from .matcalc import vec, vec_inv

RIDGE = 1e-6
# CE re-estimates are adopted only once the least-squares fit is this tight
ACCEPT_WIDTH = 0.05


class Mode(str, enum.Enum):
    STATE_FEEDBACK = "StateFeedback"
    PARTIALLY_OBSERVED = "PartiallyObserved"

    @classmethod
    def parse(cls, text) -> "Mode":
        if isinstance(text, Mode):
            return text
        key = str(text).replace("_", "").replace("-", "").lower()
        for mode in cls:
            if mode.value.lower() == key:
                return mode
        raise InvalidInstance(f"unknown mode {text!r}")


def _mat(M, shape, name):
    arr = np.array(M, dtype=float)
    if arr.ndim < 2 and shape[0] * shape[1] == arr.size:
        arr = arr.reshape(shape)
    if arr.shape != shape:
        raise InvalidDimensions(f"{name} has shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput(f"{name} has non-finite entries")
    return arr


def _is_pd(M):
    if M.size == 0:
        return True
    try:
        np.linalg.cholesky(0.5 * (M + M.T))
    except np.linalg.LinAlgError:
        return False
    return True


def _psd_factor(M):
    """Matrix L with L L' = M for symmetric PSD M."""
    M = 0.5 * (M + M.T)
    if _is_pd(M):
        return np.linalg.cholesky(M)
    evals, evecs = np.linalg.eigh(M)
    return evecs * np.sqrt(np.clip(evals, 0.0, None))


@dataclass(frozen=True, eq=False)
class LqgInstance:
    """A fully specified LQG problem.  Riccati solutions are cached lazily."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    Sigma_w: np.ndarray
    Sigma_v: np.ndarray
    mode: Mode = Mode.STATE_FEEDBACK

    @property
    def d_x(self) -> int:
        return self.A.shape[0]

    @property
    def d_u(self) -> int:
        return self.B.shape[1]

    @property
    def d_y(self) -> int:
        return self.C.shape[0]

    @property
    def state_feedback(self) -> bool:
        return self.mode is Mode.STATE_FEEDBACK

    @cached_property
    def control(self) -> riccati.ControlSolution:
        return riccati.solve_control_dare(self.A, self.B, self.Q, self.R)

    @cached_property
    def filter(self) -> riccati.FilterSolution:
        if self.state_feedback:
            n = self.d_x
            return riccati.FilterSolution(
                S=self.Sigma_w.copy(), F=np.eye(n), Sigma_nu=self.Sigma_w.copy(), Xi=np.zeros((n, n))
            )
        return riccati.solve_filter_dare(self.A, self.C, self.Sigma_w, self.Sigma_v)

    @property
    def P(self) -> np.ndarray:
        return self.control.P

    @property
    def K(self) -> np.ndarray:
        return self.control.K

    @property
    def closed_loop(self) -> np.ndarray:
        return self.control.closed_loop

    @property
    def Sigma_nu(self) -> np.ndarray:
        return self.filter.Sigma_nu

    @cached_property
    def gramian(self) -> np.ndarray:
        """Stationary covariance of the state estimate under the optimal policy."""
        return riccati.closed_loop_gramian(self.closed_loop, self.Sigma_nu)

    @property
    def Sigma_x0(self) -> np.ndarray:
        return self.gramian if self.state_feedback else self.filter.S

    @property
    def bellman_weight(self) -> np.ndarray:
        """B'PB + R, the curvature of the Bellman gap in u."""
        return self.B.T @ self.P @ self.B + self.R

    def with_matrices(self, A=None, B=None, C=None) -> "LqgInstance":
        """Copy with some system matrices replaced (costs and noise kept)."""
        return replace(
            self,
            A=self.A if A is None else np.asarray(A, dtype=float),
            B=self.B if B is None else np.asarray(B, dtype=float),
            C=self.C if C is None else np.asarray(C, dtype=float),
        )


def build_instance(
    A, B, C=None, Q=None, R=None, Sigma_w=None, Sigma_v=None, mode=Mode.STATE_FEEDBACK, solve: bool = True
) -> LqgInstance:
    """Validate matrices and (by default) solve both Riccati equations eagerly.

    In state-feedback mode ``C`` defaults to the identity and ``Sigma_v``
    to zero; any other value is rejected.
    """
    mode = Mode.parse(mode)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    d_x = A.shape[0]
    A = _mat(A, (d_x, d_x), "A")
    B = np.asarray(B, dtype=float)
    if B.ndim < 2:
        B = B.reshape(d_x, -1)
    d_u = B.shape[1]
    B = _mat(B, (d_x, d_u), "B")
    if C is None:
        if mode is not Mode.STATE_FEEDBACK:
            raise InvalidInstance("C is required for partially observed instances")
        C = np.eye(d_x)
    C = np.asarray(C, dtype=float)
    if C.ndim < 2:
        C = C.reshape(-1, d_x)
    d_y = C.shape[0]
    C = _mat(C, (d_y, d_x), "C")
    Q = _mat(np.eye(d_x) if Q is None else Q, (d_x, d_x), "Q")
    R = _mat(np.eye(d_u) if R is None else R, (d_u, d_u), "R")
    Sigma_w = _mat(np.eye(d_x) if Sigma_w is None else Sigma_w, (d_x, d_x), "Sigma_w")
    if Sigma_v is None:
        Sigma_v = np.zeros((d_y, d_y)) if mode is Mode.STATE_FEEDBACK else np.eye(d_y)
    Sigma_v = _mat(Sigma_v, (d_y, d_y), "Sigma_v")

    if not _is_pd(Sigma_w):
        raise NondegeneracyViolated("Sigma_w must be positive definite")
    if mode is Mode.STATE_FEEDBACK:
        if d_y != d_x or not np.allclose(C, np.eye(d_x), rtol=0, atol=1e-12):
            raise NondegeneracyViolated("state feedback requires C = I")
        if np.any(np.abs(Sigma_v) > 1e-12):
            raise NondegeneracyViolated("state feedback requires Sigma_v = 0")
        C, Sigma_v = np.eye(d_x), np.zeros((d_x, d_x))
    elif not _is_pd(Sigma_v):
        raise NondegeneracyViolated("partially observed instances require Sigma_v positive definite")

    inst = LqgInstance(A=A, B=B, C=C, Q=Q, R=R, Sigma_w=Sigma_w, Sigma_v=Sigma_v, mode=mode)
    if solve:
        inst.control
        inst.filter
        inst.gramian
    return inst


# ---------------------------------------------------------------- parametrizations


class ParamKind(str, enum.Enum):
    UNSTRUCTURED = "Unstructured"
    UNSTRUCTURED_AB = "UnstructuredAB"
    B_ONLY = "BOnly"
    SIMCHO_COORDINATES = "SimchoCoordinates"
    AFFINE = "Affine"
    CUSTOM = "Custom"

    @classmethod
    def parse(cls, text) -> "ParamKind":
        if isinstance(text, ParamKind):
            return text
        key = str(text).replace("_", "").replace("-", "").lower()
        for kind in cls:
            if kind.value.lower() == key:
                return kind
        raise InvalidInstance(f"unknown parametrization kind {text!r}")


@dataclass(frozen=True, eq=False)
class Parametrization:
    """Map theta -> (A, B, C).

    All built-in kinds are affine: ``offset + sum_i theta_i * basis[i]``.
    ``Custom`` wraps an arbitrary callable and is differentiated numerically.
    """

    kind: ParamKind
    d_x: int
    d_u: int
    d_y: int
    theta0: np.ndarray
    offset: tuple | None = None
    basis: tuple = ()
    func: Callable | None = None
    nominal_K: np.ndarray | None = None

    @property
    def d_theta(self) -> int:
        return int(self.theta0.size)

    @property
    def n_rows(self) -> int:
        return self.d_x * self.d_x + self.d_x * self.d_u + self.d_y * self.d_x

    @property
    def is_affine(self) -> bool:
        return self.kind is not ParamKind.CUSTOM

    @cached_property
    def _jac(self) -> np.ndarray:
        cols = [np.concatenate([vec(Ai), vec(Bi), vec(Ci)]) for Ai, Bi, Ci in self.basis]
        if not cols:
            return np.zeros((self.n_rows, 0))
        return np.column_stack(cols)

    # constructors -----------------------------------------------------

    @classmethod
    def unstructured(cls, inst: LqgInstance) -> "Parametrization":
        dx, du, dy = inst.d_x, inst.d_u, inst.d_y
        zero = (np.zeros((dx, dx)), np.zeros((dx, du)), np.zeros((dy, dx)))
        basis = _unit_basis(zero, which=(0, 1, 2))
        theta0 = np.concatenate([vec(inst.A), vec(inst.B), vec(inst.C)])
        return cls(ParamKind.UNSTRUCTURED, dx, du, dy, theta0, zero, basis)

    @classmethod
    def unstructured_ab(cls, inst: LqgInstance) -> "Parametrization":
        dx, du, dy = inst.d_x, inst.d_u, inst.d_y
        offset = (np.zeros((dx, dx)), np.zeros((dx, du)), inst.C.copy())
        basis = _unit_basis(offset, which=(0, 1))
        theta0 = np.concatenate([vec(inst.A), vec(inst.B)])
        return cls(ParamKind.UNSTRUCTURED_AB, dx, du, dy, theta0, offset, basis)

    @classmethod
    def b_only(cls, inst: LqgInstance) -> "Parametrization":
        dx, du, dy = inst.d_x, inst.d_u, inst.d_y
        offset = (inst.A.copy(), np.zeros((dx, du)), inst.C.copy())
        basis = _unit_basis(offset, which=(1,))
        return cls(ParamKind.B_ONLY, dx, du, dy, vec(inst.B), offset, basis)

    @classmethod
    def simcho_coordinates(cls, inst: LqgInstance, K=None) -> "Parametrization":
        """A(theta) = A - D K, B(theta) = B + D with D = vec_inv(theta).

        Moving along any direction leaves A + B K unchanged, so the nominal
        gain keeps producing the same closed loop.
        """
        dx, du, dy = inst.d_x, inst.d_u, inst.d_y
        K = inst.K if K is None else np.asarray(K, dtype=float)
        basis = []
        for i in range(dx * du):
            D = vec_inv(np.eye(dx * du)[i], dx, du)
            basis.append((-D @ K, D, np.zeros((dy, dx))))
        offset = (inst.A.copy(), inst.B.copy(), inst.C.copy())
        return cls(
            ParamKind.SIMCHO_COORDINATES, dx, du, dy, np.zeros(dx * du), offset, tuple(basis), nominal_K=K
        )

    @classmethod
    def affine(cls, inst: LqgInstance, basis) -> "Parametrization":
        dx, du, dy = inst.d_x, inst.d_u, inst.d_y
        triples = []
        for i, item in enumerate(basis):
            if isinstance(item, dict):
                item = (item.get("A"), item.get("B"), item.get("C"))
            Ai, Bi, Ci = item
            triples.append((
                np.zeros((dx, dx)) if Ai is None else _mat(Ai, (dx, dx), f"basis[{i}].A"),
                np.zeros((dx, du)) if Bi is None else _mat(Bi, (dx, du), f"basis[{i}].B"),
                np.zeros((dy, dx)) if Ci is None else _mat(Ci, (dy, dx), f"basis[{i}].C"),
            ))
        offset = (inst.A.copy(), inst.B.copy(), inst.C.copy())
        return cls(ParamKind.AFFINE, dx, du, dy, np.zeros(len(triples)), offset, tuple(triples))

    @classmethod
    def custom(cls, inst: LqgInstance, func: Callable, theta0) -> "Parametrization":
        theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
        return cls(ParamKind.CUSTOM, inst.d_x, inst.d_u, inst.d_y, theta0, func=func)

    @classmethod
    def from_kind(cls, inst: LqgInstance, kind, basis=None) -> "Parametrization":
        kind = ParamKind.parse(kind)
        if kind is ParamKind.UNSTRUCTURED:
            return cls.unstructured(inst)
        if kind is ParamKind.UNSTRUCTURED_AB:
            return cls.unstructured_ab(inst)
        if kind is ParamKind.B_ONLY:
            return cls.b_only(inst)
        if kind is ParamKind.SIMCHO_COORDINATES:
            return cls.simcho_coordinates(inst)
        if kind is ParamKind.AFFINE:
            return cls.affine(inst, basis or [])
        raise InvalidInstance("Custom parametrizations cannot be built from a kind name")


def _unit_basis(offset, which):
    shapes = [m.shape for m in offset]
    basis = []
    for slot in which:
        rows, cols = shapes[slot]
        for i in range(rows * cols):
            triple = [np.zeros(s) for s in shapes]
            triple[slot] = vec_inv(np.eye(rows * cols)[i], rows, cols)
            basis.append(tuple(triple))
    return tuple(basis)


def _check_theta(p: Parametrization, theta):
    theta = p.theta0 if theta is None else np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.shape != (p.d_theta,):
        raise InvalidTheta(f"theta has length {theta.size}, expected {p.d_theta}")
    return theta


def evaluate(p: Parametrization, theta=None):
    """System matrices ``(A, B, C)`` at ``theta`` (default: the nominal point)."""
    theta = _check_theta(p, theta)
    if p.kind is ParamKind.CUSTOM:
        A, B, C = p.func(theta)
        return (np.atleast_2d(np.asarray(A, dtype=float)), np.atleast_2d(np.asarray(B, dtype=float)),
                np.atleast_2d(np.asarray(C, dtype=float)))
    flat = np.concatenate([vec(m) for m in p.offset]) + p._jac @ theta
    dx, du, dy = p.d_x, p.d_u, p.d_y
    a_end = dx * dx
    b_end = a_end + dx * du
    return vec_inv(flat[:a_end], dx, dx), vec_inv(flat[a_end:b_end], dx, du), vec_inv(flat[b_end:], dy, dx)


def jacobian_abc(p: Parametrization, theta=None) -> np.ndarray:
    """Jacobian of ``vec[A B C]`` (rows: vec A, vec B, vec C) with respect to theta."""
    theta = _check_theta(p, theta)
    if p.is_affine:
        return p._jac.copy()
    step = 1e-6 * (1.0 + np.linalg.norm(theta))
    cols = []
    for j in range(p.d_theta):
        e = np.zeros(p.d_theta)
        e[j] = step
        plus = np.concatenate([vec(m) for m in evaluate(p, theta + e)])
        minus = np.concatenate([vec(m) for m in evaluate(p, theta - e)])
        cols.append((plus - minus) / (2.0 * step))
    return np.column_stack(cols) if cols else np.zeros((p.n_rows, 0))


def split_jacobian(J: np.ndarray, d_x: int, d_u: int):
    """Split a ``vec[A B C]`` Jacobian into its ``vec[A B]`` and ``vec C`` blocks."""
    cut = d_x * d_x + d_x * d_u
    return J[:cut], J[cut:]


def instance_at(inst: LqgInstance, p: Parametrization, theta) -> LqgInstance:
    A, B, C = evaluate(p, theta)
    return inst.with_matrices(A, B, C)


# ---------------------------------------------------------------- policies


class PolicyKind(str, enum.Enum):
    OPTIMAL = "Optimal"
    CE_DITHER = "CertaintyEquivalenceDither"
    LINEAR_FEEDBACK = "LinearFeedback"
    CUSTOM = "Custom"


@dataclass(frozen=True, eq=False)
class PolicySpec:
    """How inputs are chosen from the filter state.

    ``Custom`` policies receive ``(t, xhat, eta)`` with batched arrays of
    shape ``(n, d_x)`` and ``(n, d_u)`` and must return ``(n, d_u)`` inputs.
    """

    kind: PolicyKind
    feedback: np.ndarray | None = None
    sigma0: float = 0.0
    beta: float = 0.25
    initial_gain: np.ndarray | None = None
    freeze: bool = False
    warmup: int | None = None
    func: Callable | None = None

    @classmethod
    def optimal(cls) -> "PolicySpec":
        return cls(PolicyKind.OPTIMAL)

    @classmethod
    def linear_feedback(cls, K) -> "PolicySpec":
        return cls(PolicyKind.LINEAR_FEEDBACK, feedback=np.atleast_2d(np.asarray(K, dtype=float)))

    @classmethod
    def ce_dither(cls, sigma0: float, beta: float = 0.25, initial_gain=None, freeze=False, warmup=None):
        if sigma0 < 0:
            raise InvalidInput("dither scale must be nonnegative")
        gain = None if initial_gain is None else np.atleast_2d(np.asarray(initial_gain, dtype=float))
        return cls(PolicyKind.CE_DITHER, sigma0=float(sigma0), beta=float(beta),
                   initial_gain=gain, freeze=freeze, warmup=warmup)

    @classmethod
    def custom(cls, func: Callable) -> "PolicySpec":
        return cls(PolicyKind.CUSTOM, func=func)

    def dither_scale(self, t: int) -> float:
        return self.sigma0 * max(t, 1) ** (-self.beta)

    def describe(self) -> str:
        if self.kind is PolicyKind.CE_DITHER:
            return f"ce-dither(sigma0={self.sigma0:g},beta={self.beta:g})"
        if self.kind is PolicyKind.LINEAR_FEEDBACK:
            return "feedback(" + json.dumps(self.feedback.tolist()) + ")"
        return self.kind.value


def policy_action(policy: PolicySpec, t: int, xhat, rng=None, gain=None):
    """Single input for one filter state.

    ``gain`` supplies the optimal gain for ``Optimal`` and the current
    certainty-equivalent estimate for CE-dither (defaults to the policy's
    initial gain).
    """
    xhat = np.atleast_1d(np.asarray(xhat, dtype=float))
    if policy.kind is PolicyKind.LINEAR_FEEDBACK:
        return policy.feedback @ xhat
    if policy.kind is PolicyKind.OPTIMAL:
        if gain is None:
            raise InvalidInput("the optimal policy needs the optimal gain")
        return np.atleast_2d(gain) @ xhat
    if policy.kind is PolicyKind.CE_DITHER:
        gain = policy.initial_gain if gain is None else np.atleast_2d(gain)
        if gain is None:
            raise InvalidInput("CE-dither needs a current gain estimate")
        u = gain @ xhat
        scale = policy.dither_scale(t)
        if scale > 0.0:
            rng = np.random.default_rng() if rng is None else rng
            u = u + scale * rng.standard_normal(u.shape)
        return u
    eta = np.zeros((1, 0)) if rng is None else rng.standard_normal((1, 0))
    return np.asarray(policy.func(t, xhat[None, :], eta))[0]


class _Controller:
    """Batched policy state for one simulation run."""

    def __init__(self, policy: PolicySpec, inst: LqgInstance, n: int):
        self.policy = policy
        self.inst = inst
        self.n = n
        dx, du = inst.d_x, inst.d_u
        if policy.kind is PolicyKind.OPTIMAL:
            self.gain = np.broadcast_to(inst.K, (n, du, dx))
        elif policy.kind is PolicyKind.LINEAR_FEEDBACK:
            if policy.feedback.shape != (du, dx):
                raise InvalidDimensions(f"feedback gain must be {du}x{dx}")
            self.gain = np.broadcast_to(policy.feedback, (n, du, dx))
        elif policy.kind is PolicyKind.CE_DITHER:
            start = inst.K if policy.initial_gain is None else policy.initial_gain
            if start.shape != (du, dx):
                raise InvalidDimensions(f"initial gain must be {du}x{dx}")
            self.gain = np.broadcast_to(start, (n, du, dx)).copy()
            dz = dx + du
            self.gram = np.broadcast_to(RIDGE * np.eye(dz), (n, dz, dz)).copy()
            self.cross = np.zeros((n, dz, dx))
            self.target_sq = np.zeros(n)
            self.count = 0
            self.warmup = policy.warmup if policy.warmup is not None else 10 * dz
            self.next_update = self.warmup
        else:
            self.gain = None

    def act(self, t, xhat, eta):
        if self.policy.kind is PolicyKind.CUSTOM:
            return np.asarray(self.policy.func(t, xhat, eta), dtype=float).reshape(self.n, self.inst.d_u)
        u = np.einsum("nij,nj->ni", self.gain, xhat)
        if self.policy.kind is PolicyKind.CE_DITHER:
            scale = self.policy.dither_scale(t)
            if scale > 0.0:
                u = u + scale * eta
        return u

    def observe(self, t, xhat, u, xhat_next):
        if self.policy.kind is not PolicyKind.CE_DITHER:
            return
        z = np.concatenate([xhat, u], axis=1)
        self.gram += z[:, :, None] * z[:, None, :]
        self.cross += z[:, :, None] * xhat_next[:, None, :]
        self.target_sq += np.einsum("ni,ni->n", xhat_next, xhat_next)
        self.count += 1
        if self.policy.freeze or t + 1 < self.next_update:
            return
        self.next_update *= 2
        self._reestimate()

    def _reestimate(self):
        dx = self.inst.d_x
        theta = np.linalg.solve(self.gram, self.cross)  # (n, dz, dx) = [A B]'
        A_hat = np.swapaxes(theta[:, :dx, :], 1, 2)
        B_hat = np.swapaxes(theta[:, dx:, :], 1, 2)
        # crude confidence half-width: residual std times sqrt(lambda_max(G^-1))
        sse = self.target_sq - np.einsum("nij,nij->n", self.cross, theta)
        noise_var = np.clip(sse, 0.0, None) / (self.count * dx)
        width = np.sqrt(noise_var / np.linalg.eigvalsh(self.gram)[:, 0])
        scale = 1.0 + np.linalg.norm(theta, axis=(1, 2))
        _, K_hat, ok = riccati.solve_control_dare_batch(A_hat, B_hat, self.inst.Q, self.inst.R)
        accept = ok & (width <= ACCEPT_WIDTH * scale)
        self.gain = np.where(accept[:, None, None], K_hat, self.gain)


# ---------------------------------------------------------------- simulation


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Simulated signals.  Arrays carry a leading rollout axis for batches."""

    x: np.ndarray
    u: np.ndarray
    y: np.ndarray
    xhat: np.ndarray
    zeta: np.ndarray
    nu: np.ndarray
    seed: int
    first_index: int = 0
    batched: bool = field(default=False)

    @property
    def horizon(self) -> int:
        return self.u.shape[-2]

    @property
    def n_rollouts(self) -> int:
        return self.x.shape[0] if self.batched else 1

    def rollout(self, i: int) -> "Trajectory":
        if not self.batched:
            raise InvalidInput("not a batch")
        return Trajectory(self.x[i], self.u[i], self.y[i], self.xhat[i], self.zeta[i], self.nu[i],
                          self.seed, self.first_index + i, False)


def rollout_normals(seed: int, index: int, T: int, width: int) -> np.ndarray:
    """Standard normals for one rollout: one row per time step 0..T."""
    stream = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(index)])))
    return stream.standard_normal((T + 1, width))


def simulate_batch(inst: LqgInstance, policy: PolicySpec, T: int, n_rollouts: int, seed: int,
                   first_index: int = 0) -> Trajectory:
    """Simulate rollouts ``first_index .. first_index + n_rollouts - 1``."""
    if T < 1:
        raise InvalidInput("horizon must be at least 1")
    if n_rollouts < 1:
        raise InvalidInput("need at least one rollout")
    dx, du, dy = inst.d_x, inst.d_u, inst.d_y
    width = dx + dy + du
    noise = np.stack([rollout_normals(seed, first_index + i, T, width) for i in range(n_rollouts)])
    state_noise = noise[:, :, :dx] @ _psd_factor(inst.Sigma_w).T
    x0 = noise[:, 0, :dx] @ _psd_factor(inst.Sigma_x0).T
    meas_noise = noise[:, :, dx:dx + dy] @ _psd_factor(inst.Sigma_v).T
    eta = noise[:, :, dx + dy:]

    A, B, C = inst.A, inst.B, inst.C
    F = inst.filter.F
    sf = inst.state_feedback
    n = n_rollouts
    x = np.empty((n, T + 1, dx))
    y = np.empty((n, T + 1, dy))
    xhat = np.empty((n, T + 1, dx))
    zeta = np.zeros((n, T + 1, dx))
    u = np.empty((n, T, du))
    nu = np.empty((n, T, dx))

    x[:, 0] = x0
    y[:, 0] = x0 @ C.T + meas_noise[:, 0]
    xhat[:, 0] = x0 if sf else y[:, 0] @ F.T
    ctrl = _Controller(policy, inst, n)
    for t in range(T):
        u[:, t] = ctrl.act(t, xhat[:, t], eta[:, t])
        x[:, t + 1] = x[:, t] @ A.T + u[:, t] @ B.T + state_noise[:, t + 1]
        y[:, t + 1] = x[:, t + 1] @ C.T + meas_noise[:, t + 1]
        zeta[:, t + 1] = xhat[:, t] @ A.T + u[:, t] @ B.T
        if sf:
            nu[:, t] = x[:, t + 1] - zeta[:, t + 1]
            xhat[:, t + 1] = x[:, t + 1]
        else:
            nu[:, t] = (y[:, t + 1] - zeta[:, t + 1] @ C.T) @ F.T
            xhat[:, t + 1] = zeta[:, t + 1] + nu[:, t]
        ctrl.observe(t, xhat[:, t], u[:, t], xhat[:, t + 1])
    return Trajectory(x, u, y, xhat, zeta, nu, int(seed), first_index, True)


def simulate(inst: LqgInstance, policy: PolicySpec, T: int, seed: int) -> Trajectory:
    """One rollout (rollout index 0 of ``seed``)."""
    return simulate_batch(inst, policy, T, 1, seed).rollout(0)


# ---------------------------------------------------------------- JSON


REQUIRED_KEYS = ("d_x", "d_u", "d_y", "A", "B", "C", "Q", "R", "Sigma_w", "Sigma_v", "mode")


def instance_from_dict(data: dict):
    """Build ``(instance, parametrization)`` from a decoded instance JSON object."""
    missing = [k for k in REQUIRED_KEYS if k not in data]
    if missing:
        raise InvalidInstance(f"instance is missing key(s): {', '.join(missing)}")
    dims = {k: data[k] for k in ("d_x", "d_u", "d_y")}
    if not all(isinstance(v, int) and v > 0 for v in dims.values()):
        raise InvalidInstance("d_x, d_u, d_y must be positive integers")
    dx, du, dy = dims["d_x"], dims["d_u"], dims["d_y"]
    inst = build_instance(
        A=_mat(data["A"], (dx, dx), "A"),
        B=_mat(data["B"], (dx, du), "B"),
        C=_mat(data["C"], (dy, dx), "C"),
        Q=_mat(data["Q"], (dx, dx), "Q"),
        R=_mat(data["R"], (du, du), "R"),
        Sigma_w=_mat(data["Sigma_w"], (dx, dx), "Sigma_w"),
        Sigma_v=_mat(data["Sigma_v"], (dy, dy), "Sigma_v"),
        mode=data["mode"],
    )
    pdesc = data.get("parametrization") or {"kind": "UnstructuredAB"}
    if "kind" not in pdesc:
        raise InvalidInstance("parametrization is missing key: kind")
    param = Parametrization.from_kind(inst, pdesc["kind"], pdesc.get("basis"))
    if "theta_dim" in pdesc and int(pdesc["theta_dim"]) != param.d_theta:
        raise InvalidInstance(f"theta_dim {pdesc['theta_dim']} does not match parametrization ({param.d_theta})")
    return inst, param


def load_instance(path):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidInstance(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise InvalidInstance(f"{path}: top level must be an object")
    return instance_from_dict(data)
