import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lqgbounds.errors import InvalidInput, SingularCovariance
from lqgbounds.matcalc import (
    SubspaceBasis,
    gaussian_fisher,
    kernel_basis,
    kron,
    orth_projector,
    subspace_sin_distance,
    vec,
    vec_inv,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def test_vec_stacks_columns():
    assert vec([[1, 2], [3, 4]]).tolist() == [1, 3, 2, 4]
    assert np.array_equal(vec(np.zeros((2, 3))), np.zeros(6))


@given(st.integers(1, 8), st.integers(1, 8), st.data())
def test_vec_roundtrip(m, n, data):
    M = data.draw(arrays(float, (m, n), elements=finite))
    assert np.array_equal(vec_inv(vec(M), m, n), M)


@settings(max_examples=50)
@given(st.integers(0, 10_000))
def test_vec_product_identity(seed):
    rng = np.random.default_rng(seed)
    M, N, P = rng.standard_normal((3, 2)), rng.standard_normal((2, 2)), rng.standard_normal((2, 2))
    lhs = vec(M @ N @ P)
    rhs = kron(P.T, M) @ vec(N)
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * np.max(np.abs(lhs)))


def test_vec_inv_rejects_bad_length():
    with pytest.raises(InvalidInput):
        vec_inv(np.zeros(5), 2, 3)


def test_kron_layout():
    N = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(kron(np.eye(2), N), np.block([[N, np.zeros((2, 2))], [np.zeros((2, 2)), N]]))
    assert np.array_equal(kron([[2.0]], N), 2 * N)


def test_kron_eigenvalues_are_products():
    rng = np.random.default_rng(3)
    X, Y = rng.standard_normal((2, 2, 2))
    M, N = X + X.T, Y + Y.T
    expected = np.sort(np.outer(np.linalg.eigvalsh(M), np.linalg.eigvalsh(N)).ravel())
    assert np.allclose(np.sort(np.linalg.eigvalsh(kron(M, N))), expected, atol=1e-12)


def test_kernel_basis_examples():
    V = kernel_basis(np.diag([1.0, 0.0]), 1e-9)
    assert V.dim == 1 and np.allclose(np.abs(V.columns[:, 0]), [0, 1])
    assert kernel_basis(np.eye(3)).dim == 0
    k = -1.618033988749895
    H = np.array([[1.0], [k]])
    V = kernel_basis(H @ H.T, 1e-9)
    target = SubspaceBasis(np.array([[-k], [1.0]]) / np.hypot(1, k))
    assert V.dim == 1 and subspace_sin_distance(V, target) < 1e-12


def test_kernel_basis_rejects_asymmetric():
    with pytest.raises(InvalidInput):
        kernel_basis(np.array([[1.0, 1.0], [0.0, 1.0]]))


@settings(max_examples=40)
@given(st.integers(0, 10_000), st.integers(1, 5), st.integers(0, 4))
def test_kernel_annihilates(seed, n, deficit):
    rng = np.random.default_rng(seed)
    rank = max(n - deficit, 0)
    G = rng.standard_normal((n, rank))
    M = G @ G.T
    tol = 1e-9
    V = kernel_basis(M, tol)
    lam = max(np.linalg.eigvalsh(M)[-1], 1.0)
    assert V.dim >= n - rank
    if V.dim:
        assert np.max(np.abs(M @ V.columns)) <= 10 * tol * lam


def test_projector_examples():
    assert np.allclose(orth_projector(SubspaceBasis(np.eye(3))), np.eye(3))
    assert np.array_equal(orth_projector(SubspaceBasis.empty(2)), np.zeros((2, 2)))
    v = SubspaceBasis(np.array([[1.0], [1.0]]) / np.sqrt(2))
    P = orth_projector(v)
    assert np.allclose(P, 0.5)
    assert np.allclose(P @ P, P) and np.isclose(np.trace(P), 1)


def test_sin_distance_examples():
    e1 = SubspaceBasis(np.array([[1.0], [0.0]]))
    e2 = SubspaceBasis(np.array([[0.0], [1.0]]))
    assert subspace_sin_distance(e1, e1) == 0
    assert np.isclose(subspace_sin_distance(e1, e2), 1)
    rot = SubspaceBasis(np.array([[np.cos(0.3)], [np.sin(0.3)]]))
    assert np.isclose(subspace_sin_distance(e1, rot), np.sin(0.3), atol=1e-14)
    with pytest.raises(InvalidInput):
        subspace_sin_distance(e1, SubspaceBasis(np.eye(3)[:, :1]))


@settings(max_examples=30)
@given(st.integers(0, 10_000), st.integers(1, 3))
def test_sin_distance_symmetric(seed, k):
    rng = np.random.default_rng(seed)
    V = SubspaceBasis.from_spanning(rng.standard_normal((4, k)))
    W = SubspaceBasis.from_spanning(rng.standard_normal((4, k)))
    assert np.isclose(subspace_sin_distance(V, W), subspace_sin_distance(W, V), atol=1e-12)


def test_subspace_basis_validates():
    with pytest.raises(InvalidInput):
        SubspaceBasis(np.array([[1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(InvalidInput):
        SubspaceBasis(np.ones((1, 2)))


def test_gaussian_fisher_scalar_cases():
    assert np.isclose(gaussian_fisher([[1.0]], [[1.0]], [[0.0]])[0, 0], 1.0)
    assert np.isclose(gaussian_fisher([[0.0]], [[2.0]], [[1.0]])[0, 0], 0.125)
    assert np.array_equal(gaussian_fisher(np.zeros((2, 3)), np.eye(2), np.zeros((4, 3))), np.zeros((3, 3)))
    with pytest.raises(SingularCovariance):
        gaussian_fisher([[1.0]], [[0.0]], [[0.0]])


def _score_mc(mean_fn, cov_fn, theta, n, seed, h=1e-5):
    rng = np.random.default_rng(seed)
    mu, S = mean_fn(theta), cov_fn(theta)
    x = rng.multivariate_normal(mu, S, size=n)

    def loglik(t):
        m, C = mean_fn(t), cov_fn(t)
        r = x - m
        _, logdet = np.linalg.slogdet(C)
        return -0.5 * np.einsum("ni,ij,nj->n", r, np.linalg.inv(C), r) - 0.5 * logdet

    d = theta.size
    score = np.empty((n, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        score[:, j] = (loglik(theta + e) - loglik(theta - e)) / (2 * h)
    outer = score[:, :, None] * score[:, None, :]
    return outer.mean(0), outer.std(0, ddof=1) / np.sqrt(n)


def test_gaussian_fisher_variance_scalar_monte_carlo():
    est, se = _score_mc(lambda t: np.zeros(1), lambda t: np.array([[t[0]]]), np.array([2.0]), 10**6, 1)
    assert abs(est[0, 0] - 0.125) <= 3 * se[0, 0]


def test_gaussian_fisher_matrix_covariance_monte_carlo():
    # covariance directions that do not commute with Sigma separate the two vectorized forms
    base = np.array([[2.0, 0.6], [0.6, 1.0]])
    dirs = [np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([[1.0, 0.0], [0.0, 0.0]])]
    mu_dir = np.array([1.0, -0.5])

    def mean_fn(t):
        return t[0] * mu_dir

    def cov_fn(t):
        return base + t[1] * dirs[0] + t[2] * dirs[1]

    theta = np.array([0.0, 0.0, 0.0])
    mu_jac = np.column_stack([mu_dir, np.zeros(2), np.zeros(2)])
    sig_jac = np.column_stack([np.zeros(4), vec(dirs[0]), vec(dirs[1])])
    exact = gaussian_fisher(mu_jac, base, sig_jac)
    est, se = _score_mc(mean_fn, cov_fn, theta, 400_000, 7)
    assert np.all(np.abs(est - exact) <= 4 * se + 1e-12)
    prec = np.linalg.inv(base)
    alternative = mu_jac.T @ prec @ mu_jac + 0.5 * sig_jac.T @ np.kron(np.eye(2), prec @ prec) @ sig_jac
    assert np.max(np.abs(est - alternative) / se) > 10
