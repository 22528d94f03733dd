"""Uninformativeness certificates, the information-regret constant and
regret lower-bound constants, plus Monte Carlo checks of the ingredients.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import fisher, regret, riccati
from .errors import DegenerateClosedLoop, InvalidInput, NotOveractuated, WrongMode
from .matcalc import SubspaceBasis, kernel_basis, orth_projector, vec
from .model import (
    LqgInstance,
    ParamKind,
    Parametrization,
    PolicySpec,
    build_instance,
    instance_at,
    jacobian_abc,
    simulate_batch,
    split_jacobian,
)

KERNEL_TOL = 1e-9
GAIN_ACTION_TOL = 1e-8
SPHERE_POINTS = 16
_SAMPLE_SEED = 20240611


@dataclass
class HardnessReport:
    uninformative: bool
    U_basis: SubspaceBasis
    L: float
    c_main: float
    c_sf: float | None = None
    c_po: float | None = None
    diagnostics: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def dim_U(self) -> int:
        return self.U_basis.dim

    def to_dict(self) -> dict:
        return {
            "uninformative": self.uninformative,
            "dim_U": self.dim_U,
            "U_basis": self.U_basis.columns.tolist(),
            "L": self.L,
            "c_main": self.c_main,
            "c_sf": self.c_sf,
            "c_po": self.c_po,
            "diagnostics": self.diagnostics,
            "notes": list(self.notes),
        }


def _spectral(M) -> float:
    M = np.atleast_2d(M)
    return float(np.linalg.norm(M, 2)) if M.size else 0.0


def _sigma_min(M) -> float:
    return float(np.linalg.svd(np.atleast_2d(M), compute_uv=False)[-1])


def _precision(M):
    prec = np.linalg.inv(M)
    return 0.5 * (prec + prec.T)


def _sphere_directions(dim, count, seed=_SAMPLE_SEED):
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, dim])))
    d = rng.standard_normal((count, dim))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def excitation_matrix(inst: LqgInstance, p: Parametrization, theta=None) -> np.ndarray:
    """Matrix whose kernel holds the directions the optimal policy leaves unexcited.

    State feedback: J' (H H' kron Sigma_w^-1) J with H = [I; K].  Partially
    observed: the transition weight becomes blockdiag(I, K K') and an output
    term J_C' (I kron Sigma_v^-1) J_C is added.  K is the nominal gain,
    J is evaluated at ``theta``.
    """
    J_ab, J_c = split_jacobian(jacobian_abc(p, theta), inst.d_x, inst.d_u)
    K = inst.K
    dx, du = inst.d_x, inst.d_u
    if inst.state_feedback:
        H = np.vstack([np.eye(dx), K])
        weight = H @ H.T
    else:
        weight = np.zeros((dx + du, dx + du))
        weight[:dx, :dx] = np.eye(dx)
        weight[dx:, dx:] = K @ K.T
    M = J_ab.T @ np.kron(weight, _precision(inst.Sigma_w)) @ J_ab
    if not inst.state_feedback:
        M = M + J_c.T @ np.kron(np.eye(dx), _precision(inst.Sigma_v)) @ J_c
    return 0.5 * (M + M.T)


def _gain_at(inst: LqgInstance, p: Parametrization, theta) -> np.ndarray:
    A, B, _ = (np.atleast_2d(m) for m in _evaluate(p, theta))
    return riccati.solve_control_dare(A, B, inst.Q, inst.R).K


def _evaluate(p, theta):
    from .model import evaluate

    return evaluate(p, theta)


def dK_directional(inst: LqgInstance, Delta) -> np.ndarray:
    """Derivative of K along (A - t Delta K, B + t Delta) at t = 0."""
    Delta = np.atleast_2d(np.asarray(Delta, dtype=float))
    if Delta.shape != (inst.d_x, inst.d_u):
        raise InvalidInput(f"Delta must be {inst.d_x}x{inst.d_u}")
    return -np.linalg.solve(inst.bellman_weight, Delta.T @ inst.P @ inst.closed_loop)


def jacobian_K(inst: LqgInstance, p: Parametrization, step: float | None = None) -> np.ndarray:
    """Jacobian of vec K(theta) at the nominal theta, shape (d_u d_x, d_theta)."""
    dx, du = inst.d_x, inst.d_u
    if p.kind is ParamKind.SIMCHO_COORDINATES and np.allclose(p.nominal_K, inst.K, atol=1e-12):
        cols = []
        for j in range(p.d_theta):
            Delta = p.basis[j][1]
            cols.append(vec(dK_directional(inst, Delta)))
        return np.column_stack(cols) if cols else np.zeros((du * dx, 0))
    theta0 = p.theta0
    h = 1e-5 * (1.0 + np.linalg.norm(theta0)) if step is None else step
    cols = []
    for j in range(p.d_theta):
        e = np.zeros(p.d_theta)
        e[j] = h
        cols.append((vec(_gain_at(inst, p, theta0 + e)) - vec(_gain_at(inst, p, theta0 - e))) / (2.0 * h))
    return np.column_stack(cols) if cols else np.zeros((du * dx, 0))


def _filter_by_gain(V0: SubspaceBasis, DK: np.ndarray) -> SubspaceBasis:
    """Directions of V0 that actually move the gain (maximal such subspace)."""
    if V0.dim == 0:
        return V0
    scale = _spectral(DK)
    if scale == 0.0:
        return SubspaceBasis.empty(V0.ambient_dim)
    _, s, vt = np.linalg.svd(DK @ V0.columns, full_matrices=True)
    keep = np.zeros(V0.dim, dtype=bool)
    keep[: s.size] = s > GAIN_ACTION_TOL * scale
    return SubspaceBasis.from_spanning(V0.columns @ vt[keep].T)


def certify_uninformative(inst: LqgInstance, p: Parametrization, eps: float,
                          kernel_tol: float = KERNEL_TOL) -> tuple[bool, SubspaceBasis]:
    """Check local uninformativeness and return the information-singular subspace.

    The kernel of :func:`excitation_matrix` is intersected over the centre
    and ``SPHERE_POINTS`` points at radius ``eps / 2`` inside the centre's
    kernel (for affine maps the matrix is constant and one evaluation is
    exact), then restricted to directions with a nonzero gain derivative.
    """
    if eps <= 0:
        raise InvalidInput("eps must be positive")
    theta0 = p.theta0
    total = excitation_matrix(inst, p, theta0)
    V0 = kernel_basis(total, kernel_tol)
    if not p.is_affine and V0.dim > 0:
        for d in _sphere_directions(V0.dim, SPHERE_POINTS):
            total = total + excitation_matrix(inst, p, theta0 + 0.5 * eps * (V0.columns @ d))
        V0 = kernel_basis(total, kernel_tol)
    U = _filter_by_gain(V0, jacobian_K(inst, p))
    return U.dim > 0, U


def unstructured_singular_subspace(inst: LqgInstance) -> SubspaceBasis:
    """Span of vec[-Delta K, Delta] over all Delta, in vec[A B] coordinates."""
    closed = inst.closed_loop
    if abs(np.linalg.det(closed)) <= 1e-12 * max(1.0, _spectral(closed)) ** inst.d_x:
        raise DegenerateClosedLoop("A + B K is singular")
    dx, du = inst.d_x, inst.d_u
    cols = []
    for i in range(dx * du):
        Delta = np.zeros(dx * du)
        Delta[i] = 1.0
        Delta = Delta.reshape((dx, du), order="F")
        cols.append(np.concatenate([vec(-Delta @ inst.K), vec(Delta)]))
    return SubspaceBasis.from_spanning(np.column_stack(cols))


def info_regret_constant(inst: LqgInstance, p: Parametrization, eps: float) -> float:
    """tr(Sigma_w^-1) * min ||J_AB||^2 over the eps-ball * ||(B'PB + R)^-1||."""
    J_ab, _ = split_jacobian(jacobian_abc(p), inst.d_x, inst.d_u)
    jac_sq = _spectral(J_ab) ** 2
    if not p.is_affine and p.d_theta > 0:
        for d in _sphere_directions(p.d_theta, SPHERE_POINTS):
            J_s, _ = split_jacobian(jacobian_abc(p, p.theta0 + eps * d), inst.d_x, inst.d_u)
            jac_sq = min(jac_sq, _spectral(J_s) ** 2)
    return float(np.trace(_precision(inst.Sigma_w)) * jac_sq * _spectral(np.linalg.inv(inst.bellman_weight)))


def _main_constant(inst, U, L, DK):
    if U.dim == 0 or L <= 0:
        return 0.0
    weight = np.kron(inst.gramian, inst.bellman_weight)
    trace = float(np.trace(weight @ DK @ orth_projector(U) @ DK.T))
    return 0.25 * math.sqrt(U.dim / L) * math.sqrt(max(trace, 0.0))


def lower_bound_main(inst: LqgInstance, p: Parametrization, eps: float) -> float:
    """(1/4) sqrt(dim U / L) sqrt(tr[(Gamma kron (B'PB+R)) DK P_U DK'])."""
    flag, U = certify_uninformative(inst, p, eps)
    if not flag:
        return 0.0
    return _main_constant(inst, U, info_regret_constant(inst, p, eps), jacobian_K(inst, p))


def _require_invertible_closed_loop(inst):
    closed = inst.closed_loop
    if _sigma_min(closed) <= 1e-12 * max(1.0, _spectral(closed)):
        raise DegenerateClosedLoop("A + B K is singular")


def lower_bound_sf_corollary(inst: LqgInstance) -> float:
    """Closed-form constant for state feedback with A and B fully unknown."""
    if not inst.state_feedback:
        raise WrongMode("c_sf needs a state-feedback instance")
    _require_invertible_closed_loop(inst)
    W = inst.bellman_weight
    KKt = inst.K @ inst.K.T
    return (
        0.25 * math.sqrt(inst.d_x) * inst.d_u
        * _sigma_min(inst.P) / _spectral(KKt)
        * _sigma_min(W) / _spectral(W)
        * math.sqrt(_sigma_min(inst.Sigma_w) * _sigma_min(inst.gramian))
        * _sigma_min(inst.closed_loop)
    )


def gain_kernel_dim(inst: LqgInstance, tol: float = KERNEL_TOL) -> int:
    return kernel_basis(inst.K @ inst.K.T, tol).dim


def lower_bound_po_corollary(inst: LqgInstance) -> float:
    """Closed-form constant for over-actuated systems (K K' singular), B unknown."""
    kdim = gain_kernel_dim(inst)
    if kdim == 0:
        raise NotOveractuated("K K' is nonsingular")
    _require_invertible_closed_loop(inst)
    W = inst.bellman_weight
    return (
        0.25 * math.sqrt(inst.d_x) * kdim
        * _sigma_min(inst.P)
        * _sigma_min(W) / _spectral(W)
        * math.sqrt(_sigma_min(inst.Sigma_w) * _sigma_min(inst.gramian))
        * _sigma_min(inst.closed_loop)
    )


def analyze(inst: LqgInstance, p: Parametrization, eps: float) -> HardnessReport:
    """Certificate, L, all applicable lower-bound constants and diagnostics."""
    flag, U = certify_uninformative(inst, p, eps)
    L = info_regret_constant(inst, p, eps)
    notes = []
    if flag:
        c_main = _main_constant(inst, U, L, jacobian_K(inst, p))
    else:
        c_main = 0.0
        notes.append("NotUninformative: no direction is both unexcited by the optimal policy and gain-relevant")
    if not p.is_affine:
        notes.append("certificate and L use a finite sample of the eps-ball")
    c_sf = c_po = None
    if inst.state_feedback and p.kind is ParamKind.UNSTRUCTURED_AB:
        try:
            c_sf = lower_bound_sf_corollary(inst)
        except DegenerateClosedLoop:
            notes.append("c_sf skipped: A + B K is singular")
    if not inst.state_feedback:
        try:
            c_po = lower_bound_po_corollary(inst)
        except (NotOveractuated, DegenerateClosedLoop) as exc:
            notes.append(f"c_po skipped: {exc}")
    diagnostics = {
        "sigma_min_P": _sigma_min(inst.P),
        "sigma_min_Gamma": _sigma_min(inst.gramian),
        "ker_KKT_dim": gain_kernel_dim(inst),
        "cond_BPBR": float(np.linalg.cond(inst.bellman_weight)),
        "spectral_radius_closed_loop": riccati.spectral_radius(inst.closed_loop),
    }
    return HardnessReport(flag, U, L, c_main, c_sf, c_po, diagnostics, notes)


# ---------------------------------------------------------------- sweeps


class SweepKind(str, enum.Enum):
    MARGINAL_STABILITY = "MarginalStability"
    POOR_OBSERVABILITY = "PoorObservability"


@dataclass
class SweepResult:
    kind: SweepKind
    rows: list
    checks: dict


def _scalar_sf(a, b):
    return build_instance([[a]], [[b]])


def _scalar_po(a, b, c):
    return build_instance([[a]], [[b, 0.0]], [[c]], mode="PartiallyObserved")


def failure_sweep(kind, grid, a: float = 2.0, b: float = 1.0, vary: str = "b") -> SweepResult:
    """Tabulate Riccati quantities and bound constants along a scalar family.

    MarginalStability varies ``b`` (or ``a`` when ``vary="a"``) of a scalar
    state-feedback system.  PoorObservability varies the output gain ``c``
    of the over-actuated system x' = a x + [b, 0] u + w, y = c x + v.
    """
    kind = SweepKind(kind) if not isinstance(kind, SweepKind) else kind
    grid = [float(g) for g in grid]
    rows = []
    if kind is SweepKind.MARGINAL_STABILITY:
        for g in grid:
            aa, bb = (g, b) if vary == "a" else (a, g)
            inst = _scalar_sf(aa, bb)
            p, k = float(inst.P[0, 0]), float(inst.K[0, 0])
            rows.append({
                "a": aa, "b": bb, "p": p, "k": k, "a_plus_bk": aa + bb * k,
                "Gamma": float(inst.gramian[0, 0]),
                "c_sf": lower_bound_sf_corollary(inst),
                "p_b2_over_a2m1": p * bb * bb / (aa * aa - 1.0) if aa * aa != 1.0 else float("nan"),
            })
        checks = {}
        if vary == "b":
            small = [r for r in rows if r["b"] <= 0.02]
            checks["p_b2_ratio_within_10pct"] = bool(small) and all(
                abs(r["p_b2_over_a2m1"] - 1.0) <= 0.1 for r in small)
        else:
            ordered = sorted(rows, key=lambda r: -r["a"])
            checks["Gamma_increases_as_a_decreases"] = all(
                later["Gamma"] > earlier["Gamma"] for earlier, later in zip(ordered, ordered[1:]))
        return SweepResult(kind, rows, checks)

    for c in grid:
        inst = _scalar_po(a, b, c)
        s = float(inst.filter.S[0, 0])
        snu = float(inst.Sigma_nu[0, 0])
        rows.append({
            "c": c, "p": float(inst.P[0, 0]), "k": float(inst.K[0, 0]),
            "a_plus_bk": float(inst.closed_loop[0, 0]), "s": s, "f": float(inst.filter.F[0, 0]),
            "Sigma_nu": snu, "Gamma": float(inst.gramian[0, 0]),
            "c_po": lower_bound_po_corollary(inst),
            "Sigma_nu_scaled": snu * c * c * a * a / (a * a - 1.0) ** 2,
        })
    small = [r for r in rows if r["c"] <= 0.02]
    ordered = sorted(rows, key=lambda r: -r["c"])
    checks = {
        "Sigma_nu_asymptote_within_10pct": bool(small) and all(
            abs(r["Sigma_nu_scaled"] - 1.0) <= 0.1 for r in small),
        "c_po_increases_as_c_decreases": all(
            later["c_po"] > earlier["c_po"] for earlier, later in zip(ordered, ordered[1:])),
    }
    return SweepResult(kind, rows, checks)


# ---------------------------------------------------------------- Monte Carlo checks


@dataclass(frozen=True)
class InequalityCheck:
    lhs: float
    rhs: float
    holds: bool
    std_error: float


def info_regret_inequality_check(inst: LqgInstance, p: Parametrization, policy: PolicySpec, T: int,
                                 n_rollouts: int, seed: int, eps: float = 0.1) -> InequalityCheck:
    """Compare tr(V0' I V0) with L times the regret on shared rollouts."""
    flag, U = certify_uninformative(inst, p, eps)
    if not flag:
        raise InvalidInput("instance is not certified uninformative")
    L = info_regret_constant(inst, p, eps)
    traj = simulate_batch(inst, policy, T, n_rollouts, seed)
    info_fn = fisher.sf_information if inst.state_feedback else fisher.po_information_upper
    info = info_fn(inst, p, policy, T, n_rollouts, seed, traj=traj)
    V = U.columns
    lhs_samples = np.einsum("ai,nab,bi->n", V, info.samples, V)
    rhs_samples = L * regret.representation_samples(inst, traj)
    diff = lhs_samples - rhs_samples
    se = float(diff.std(ddof=1) / math.sqrt(diff.size)) if diff.size > 1 else 0.0
    lhs, rhs = float(lhs_samples.mean()), float(rhs_samples.mean())
    return InequalityCheck(lhs, rhs, lhs <= rhs + 3.0 * se, se)


@dataclass(frozen=True)
class LlnCheck:
    probability: float
    n_rollouts: int
    block_length: int
    n_blocks: int


def covariance_lln_check(inst: LqgInstance, policy: PolicySpec, T: int, alpha: float, delta: float,
                         n_rollouts: int, seed: int) -> LlnCheck:
    """Fraction of rollouts where every block sum of xhat xhat' dominates Gamma T^(1-alpha).

    Blocks run over t = k m .. (k+1) m inclusive with m = ceil(T^(1-alpha)),
    for every k with (k+1) m <= T; Gamma is the deflated finite gramian with
    m + 1 terms.
    """
    if not 0 < alpha < 1:
        raise InvalidInput("alpha must lie in (0, 1)")
    m = math.ceil(T ** (1.0 - alpha))
    gram = riccati.finite_gramian(inst.closed_loop, inst.Sigma_nu, delta, m)
    n_blocks = T // m
    if n_blocks < 1:
        raise InvalidInput("horizon shorter than one block")
    target = gram * T ** (1.0 - alpha)
    xh = simulate_batch(inst, policy, T, n_rollouts, seed).xhat
    ok = np.ones(n_rollouts, dtype=bool)
    for k in range(n_blocks):
        block = xh[:, k * m:(k + 1) * m + 1]
        moment = np.einsum("nti,ntj->nij", block, block)
        ok &= np.linalg.eigvalsh(moment - target)[:, 0] >= 0.0
    return LlnCheck(float(ok.mean()), n_rollouts, m, n_blocks)
