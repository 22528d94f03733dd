"""Control and filter Riccati equations, gains, and closed-loop gramians."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateInnovation,
    DivisionByZero,
    InvalidCost,
    InvalidDelta,
    InvalidDimensions,
    NotDetectable,
    NotStabilizable,
    UnstableClosedLoop,
)

RELATIVE_TOL = 1e-12
MAX_ITER = 100_000
_KRON_LIMIT = 30


@dataclass(frozen=True)
class ControlSolution:
    P: np.ndarray
    K: np.ndarray
    closed_loop: np.ndarray
    iterations: int


@dataclass(frozen=True)
class FilterSolution:
    S: np.ndarray
    F: np.ndarray
    Sigma_nu: np.ndarray
    Xi: np.ndarray


def _sym(M):
    return 0.5 * (M + M.T)


def _as2d(M):
    return np.atleast_2d(np.asarray(M, dtype=float))


def spectral_radius(M) -> float:
    M = _as2d(M)
    if M.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def _require_pd(M, name):
    try:
        np.linalg.cholesky(_sym(M))
    except np.linalg.LinAlgError as exc:
        raise InvalidCost(f"{name} must be positive definite") from exc
    if np.max(np.abs(M - M.T)) > 1e-10 * max(1.0, np.max(np.abs(M))):
        raise InvalidCost(f"{name} must be symmetric")


def _control_step(A, B, Q, R, P):
    BtP = B.T @ P
    gain_rhs = BtP @ A
    W = R + BtP @ B
    K = -np.linalg.solve(W, gain_rhs)
    P_next = Q + A.T @ P @ A + gain_rhs.T @ K
    return _sym(P_next), K


def solve_control_dare(A, B, Q, R, tol: float = RELATIVE_TOL, max_iter: int = MAX_ITER) -> ControlSolution:
    """Stabilizing solution of P = Q + A'PA - A'PB(B'PB+R)^-1 B'PA.

    Value iteration from ``P = Q`` until the relative change drops below
    ``tol``.  The gain is ``K = -(B'PB+R)^-1 B'PA`` so that ``u = K x``.
    """
    A, B, Q, R = (_as2d(M) for M in (A, B, Q, R))
    n, m = B.shape
    if A.shape != (n, n) or Q.shape != (n, n) or R.shape != (m, m):
        raise InvalidDimensions("control DARE: shapes of A, B, Q, R are inconsistent")
    _require_pd(Q, "Q")
    _require_pd(R, "R")
    P = Q.copy()
    with np.errstate(over="raise", invalid="raise"):
        for it in range(1, max_iter + 1):
            try:
                P_next, K = _control_step(A, B, Q, R, P)
            except (FloatingPointError, np.linalg.LinAlgError) as exc:
                raise NotStabilizable("Riccati iteration diverged") from exc
            if not np.all(np.isfinite(P_next)):
                raise NotStabilizable("Riccati iteration diverged")
            change = np.max(np.abs(P_next - P))
            P = P_next
            if change <= tol * np.max(np.abs(P)):
                break
        else:
            raise NotStabilizable(f"Riccati iteration did not converge in {max_iter} steps")
    K = -np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
    closed = A + B @ K
    if spectral_radius(closed) >= 1.0:
        raise NotStabilizable("Riccati fixed point does not stabilize (A, B)")
    return ControlSolution(P=P, K=K, closed_loop=closed, iterations=it)


def solve_filter_dare(A, C, Sigma_w, Sigma_v, tol: float = RELATIVE_TOL, max_iter: int = MAX_ITER) -> FilterSolution:
    """Stationary one-step prediction covariance S of the Kalman filter.

    Iterates S = A S A' - A S C'(C S C' + Sv)^-1 C S A' + Sw from S = Sw and
    returns S with the filter gain F = S C'(C S C' + Sv)^-1, the innovation
    covariance of the state estimate and the posterior error covariance.
    """
    A, C, Sw, Sv = (_as2d(M) for M in (A, C, Sigma_w, Sigma_v))
    n = A.shape[0]
    p = C.shape[0]
    if A.shape != (n, n) or C.shape != (p, n) or Sw.shape != (n, n) or Sv.shape != (p, p):
        raise InvalidDimensions("filter DARE: shapes of A, C, Sigma_w, Sigma_v are inconsistent")
    S = Sw.copy()
    with np.errstate(over="raise", invalid="raise"):
        for _ in range(max_iter):
            try:
                S_next = _filter_step(A, C, Sw, Sv, S)
            except FloatingPointError as exc:
                raise NotDetectable("filter Riccati iteration diverged") from exc
            if not np.all(np.isfinite(S_next)):
                raise NotDetectable("filter Riccati iteration diverged")
            change = np.max(np.abs(S_next - S))
            S = S_next
            if change <= tol * max(np.max(np.abs(S)), np.finfo(float).tiny):
                break
        else:
            raise NotDetectable(f"filter Riccati iteration did not converge in {max_iter} steps")
    innov = C @ S @ C.T + Sv
    F = np.linalg.solve(innov.T, (S @ C.T).T).T
    if spectral_radius((np.eye(n) - F @ C) @ A) >= 1.0:
        raise NotDetectable("filter fixed point is not stabilizing")
    Sigma_nu = _sym(F @ innov @ F.T)
    Xi = _sym(S - F @ C @ S)
    return FilterSolution(S=S, F=F, Sigma_nu=Sigma_nu, Xi=Xi)


def _filter_step(A, C, Sw, Sv, S):
    innov = C @ S @ C.T + Sv
    scale = max(1.0, np.max(np.abs(innov)))
    if np.linalg.matrix_rank(innov, tol=1e-13 * scale) < innov.shape[0]:
        raise DegenerateInnovation("innovation covariance C S C' + Sigma_v is singular")
    ASCt = A @ S @ C.T
    return _sym(A @ S @ A.T - ASCt @ np.linalg.solve(innov, ASCt.T) + Sw)


def closed_loop_gramian(closed_loop, Sigma_nu) -> np.ndarray:
    """Solve G = M G M' + Sigma_nu for a stable M."""
    M = _as2d(closed_loop)
    Sn = _as2d(Sigma_nu)
    n = M.shape[0]
    if spectral_radius(M) >= 1.0:
        raise UnstableClosedLoop("closed loop has spectral radius >= 1")
    if n <= _KRON_LIMIT:
        lhs = np.eye(n * n) - np.kron(M, M)
        G = np.linalg.solve(lhs, Sn.reshape(-1, order="F")).reshape((n, n), order="F")
        return _sym(G)
    # squared Smith iteration: after k rounds G holds 2^k terms of the series
    G, Mp = Sn.copy(), M.copy()
    for _ in range(200):
        increment = Mp @ G @ Mp.T
        G = G + increment
        Mp = Mp @ Mp
        if np.max(np.abs(increment)) <= 1e-16 * np.max(np.abs(G)):
            break
    return _sym(G)


def finite_gramian(closed_loop, Sigma_nu, delta: float, N: int) -> np.ndarray:
    """Partial sum over j = 0..N of M^j (Sigma_nu - delta I) M^j'."""
    M = _as2d(closed_loop)
    n = M.shape[0]
    base = _as2d(Sigma_nu) - float(delta) * np.eye(n)
    if np.min(np.linalg.eigvalsh(_sym(base))) < -1e-12 * max(1.0, np.max(np.abs(base))):
        raise InvalidDelta("Sigma_nu - delta I is not positive semidefinite")
    if spectral_radius(M) >= 1.0:
        raise UnstableClosedLoop("closed loop has spectral radius >= 1")
    if N < 0:
        raise InvalidDelta("N must be nonnegative")
    total = base.copy()
    term = base
    for _ in range(int(N)):
        term = M @ term @ M.T
        total = total + term
    return _sym(total)


def scalar_control_riccati(a: float, b: float) -> tuple[float, float]:
    """Closed-form scalar DARE with q = r = 1.

    ``p`` solves b^2 p^2 - (a^2 + b^2 - 1) p - 1 = 0.  Both roots are tried
    and the one with ``p >= 0`` and a stable closed loop is returned, along
    with the gain ``k = -a b p / (b^2 p + 1)``.
    """
    a = float(a)
    b = float(b)
    if b == 0.0:
        raise DivisionByZero("scalar closed form needs b != 0")
    s = a * a + b * b - 1.0
    disc = math.sqrt(s * s + 4.0 * b * b)
    # each root in the form that avoids cancellation for the sign of s
    if s >= 0.0:
        plus, minus = (s + disc) / (2.0 * b * b), -2.0 / (s + disc)
    else:
        plus, minus = 2.0 / (disc - s), (s - disc) / (2.0 * b * b)
    for p in (plus, minus):
        k = -a * b * p / (b * b * p + 1.0)
        if p >= 0.0 and abs(a + b * k) < 1.0:
            return p, k
    raise NotStabilizable("neither root of the scalar Riccati equation is stabilizing")


def solve_control_dare_batch(A, B, Q, R, tol: float = 1e-10, max_iter: int = 5000):
    """Vectorized value iteration over a stack of (A, B) pairs.

    Returns ``(P, K, ok)`` where ``ok`` marks entries that converged to a
    stabilizing solution.  Used by certainty-equivalent controllers.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    Q = _as2d(Q)
    R = _as2d(R)
    batch = A.shape[0]
    P = np.broadcast_to(Q, (batch,) + Q.shape).copy()
    At = np.swapaxes(A, 1, 2)
    Bt = np.swapaxes(B, 1, 2)
    active = np.ones(batch, dtype=bool)
    with np.errstate(all="ignore"):
        for _ in range(max_iter):
            BtP = Bt @ P
            W = R + BtP @ B
            K = -np.linalg.solve(W, BtP @ A)
            P_next = Q + At @ P @ A + np.swapaxes(BtP @ A, 1, 2) @ K
            P_next = 0.5 * (P_next + np.swapaxes(P_next, 1, 2))
            change = np.max(np.abs(P_next - P), axis=(1, 2))
            scale = np.max(np.abs(P_next), axis=(1, 2))
            P = np.where(active[:, None, None], P_next, P)
            finite = np.isfinite(scale) & (scale < 1e12)
            active &= finite & ~(change <= tol * scale)
            if not active.any():
                break
        K = -np.linalg.solve(R + Bt @ P @ B, Bt @ P @ A)
        radius = np.max(np.abs(np.linalg.eigvals(A + B @ K)), axis=1)
    ok = ~active & np.all(np.isfinite(P), axis=(1, 2)) & (radius < 1.0)
    return P, K, ok
