"""Small dense linear-algebra helpers: vectorization, Kronecker products,
numerical kernels and subspace comparison.

All matrices are dense ``numpy`` arrays.  ``vec`` stacks columns, so the
identity ``vec(M @ N @ P) == kron(P.T, M) @ vec(N)`` holds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, SingularCovariance

_ORTHO_TOL = 1e-12
_SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class SubspaceBasis:
    """Orthonormal basis of a subspace of R^n, stored column-wise.

    Parameters
    ----------
    columns : ndarray, shape (n, k)
        Orthonormal columns.  ``k`` may be zero.
    """

    columns: np.ndarray

    def __post_init__(self):
        cols = np.asarray(self.columns, dtype=float)
        if cols.ndim != 2:
            raise InvalidInput("basis columns must form a 2-D array")
        n, k = cols.shape
        if k > n:
            raise InvalidInput(f"{k} columns cannot be orthonormal in R^{n}")
        gram = cols.T @ cols
        if k and np.max(np.abs(gram - np.eye(k))) > _ORTHO_TOL:
            raise InvalidInput("basis columns are not orthonormal")
        object.__setattr__(self, "columns", cols)

    @property
    def ambient_dim(self) -> int:
        return self.columns.shape[0]

    @property
    def dim(self) -> int:
        return self.columns.shape[1]

    @classmethod
    def empty(cls, n: int) -> "SubspaceBasis":
        return cls(np.zeros((n, 0)))

    @classmethod
    def from_spanning(cls, vectors: np.ndarray, rank_tol: float = 1e-10) -> "SubspaceBasis":
        """Orthonormalize the column span of ``vectors`` (rank-revealing SVD)."""
        vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
        n = vectors.shape[0]
        if vectors.shape[1] == 0:
            return cls.empty(n)
        u, s, _ = np.linalg.svd(vectors, full_matrices=False)
        if s.size == 0 or s[0] == 0.0:
            return cls.empty(n)
        rank = int(np.sum(s > rank_tol * s[0]))
        return cls(_reorthonormalize(u[:, :rank]))


def _reorthonormalize(cols: np.ndarray) -> np.ndarray:
    # one QR pass cleans up round-off left by eigensolvers
    if cols.shape[1] == 0:
        return cols
    q, r = np.linalg.qr(cols)
    return q * np.sign(np.where(np.diag(r) == 0, 1.0, np.diag(r)))


def vec(M) -> np.ndarray:
    """Stack the columns of ``M`` into one vector."""
    return np.asarray(M, dtype=float).reshape(-1, order="F")


def vec_inv(v, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`vec` for a ``rows x cols`` matrix."""
    v = np.asarray(v, dtype=float)
    if v.size != rows * cols:
        raise InvalidInput(f"vector of length {v.size} cannot be reshaped to {rows}x{cols}")
    return v.reshape((rows, cols), order="F")


def kron(M, N) -> np.ndarray:
    """Kronecker product with block (i, j) equal to ``M[i, j] * N``."""
    return np.kron(np.atleast_2d(np.asarray(M, dtype=float)), np.atleast_2d(np.asarray(N, dtype=float)))


def kernel_basis(M, tol: float | None = None) -> SubspaceBasis:
    """Eigenvectors of a symmetric PSD matrix whose eigenvalues are numerically zero.

    An eigenvalue counts as zero when it is at most ``tol * max(1, lambda_max)``.
    The default ``tol`` is ``n`` times machine epsilon.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    n = M.shape[0]
    if M.shape != (n, n):
        raise InvalidInput("kernel_basis needs a square matrix")
    if n == 0:
        return SubspaceBasis.empty(0)
    scale = max(1.0, float(np.max(np.abs(M))))
    if np.max(np.abs(M - M.T)) > _SYMMETRY_TOL * scale:
        raise InvalidInput("kernel_basis needs a symmetric matrix")
    if tol is None:
        tol = n * np.finfo(float).eps
    evals, evecs = np.linalg.eigh(0.5 * (M + M.T))
    cutoff = tol * max(1.0, float(evals[-1]))
    return SubspaceBasis(_reorthonormalize(evecs[:, evals <= cutoff]))


def orth_projector(V: SubspaceBasis) -> np.ndarray:
    """Orthogonal projector ``V V^T`` onto the subspace."""
    return V.columns @ V.columns.T


def subspace_sin_distance(V: SubspaceBasis, W: SubspaceBasis) -> float:
    """Spectral norm of ``(I - P_V) P_W``; 0 for nested, 1 for orthogonal subspaces."""
    if V.ambient_dim != W.ambient_dim:
        raise InvalidInput(
            f"ambient dimensions differ: {V.ambient_dim} vs {W.ambient_dim}"
        )
    if W.dim == 0:
        return 0.0
    # (I - P_V) P_W has the same nonzero singular values as (I - P_V) W
    residual = W.columns - V.columns @ (V.columns.T @ W.columns)
    return float(min(1.0, np.linalg.norm(residual, 2)))


def gaussian_fisher(mu_jac, Sigma, sigma_jac) -> np.ndarray:
    """Fisher information of N(mu(theta), Sigma(theta)) at one parameter value.

    Parameters
    ----------
    mu_jac : ndarray, shape (d, d_theta)
        Jacobian of the mean.
    Sigma : ndarray, shape (d, d)
        Covariance, positive definite.
    sigma_jac : ndarray, shape (d*d, d_theta)
        Jacobian of ``vec(Sigma)``.

    Returns
    -------
    ndarray, shape (d_theta, d_theta)
        ``mu_jac.T Sigma^-1 mu_jac + 0.5 sigma_jac.T (Sigma^-1 kron Sigma^-1) sigma_jac``,
        the vectorized form of ``0.5 tr(Sigma^-1 dSigma_i Sigma^-1 dSigma_j)``.
    """
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    mu_jac = np.atleast_2d(np.asarray(mu_jac, dtype=float))
    sigma_jac = np.atleast_2d(np.asarray(sigma_jac, dtype=float))
    d = Sigma.shape[0]
    if mu_jac.shape[0] != d or sigma_jac.shape[0] != d * d:
        raise InvalidInput("Jacobian row counts do not match the covariance dimension")
    if mu_jac.shape[1] != sigma_jac.shape[1]:
        raise InvalidInput("mean and covariance Jacobians disagree on parameter count")
    try:
        chol = np.linalg.cholesky(0.5 * (Sigma + Sigma.T))
    except np.linalg.LinAlgError as exc:
        raise SingularCovariance("covariance is not positive definite") from exc
    if np.min(np.diag(chol)) ** 2 <= 1e-14 * np.max(np.diag(chol)) ** 2:
        raise SingularCovariance("covariance is numerically singular")
    prec = np.linalg.inv(Sigma)
    prec = 0.5 * (prec + prec.T)
    info = mu_jac.T @ prec @ mu_jac + 0.5 * sigma_jac.T @ np.kron(prec, prec) @ sigma_jac
    return 0.5 * (info + info.T)
