import numpy as np
import pytest

import oracles
from lqgbounds.errors import InvalidPrior, NondegeneracyViolated, WrongMode
from lqgbounds.fisher import (
    Prior,
    cosine_bump,
    location_integral,
    optimal_policy_information,
    po_information_upper,
    score_oracle_information,
    sf_information,
    stationary_state_input_moment,
    van_trees_check,
)
from lqgbounds.matcalc import SubspaceBasis, kernel_basis, subspace_sin_distance
from lqgbounds.model import Parametrization, PolicySpec, build_instance, simulate_batch


def test_sf_information_by_hand(e1):
    p = Parametrization.unstructured_ab(e1)
    pol = PolicySpec.linear_feedback(e1.K + 0.1)
    info = sf_information(e1, p, pol, 12, 3, seed=8)
    tr = simulate_batch(e1, pol, 12, 3, seed=8)
    by_hand = []
    for i in range(3):
        total = np.zeros((2, 2))
        for t in range(12):
            z = np.array([tr.x[i, t, 0], tr.u[i, t, 0]])
            total += np.outer(z, z)
        by_hand.append(total)
    assert np.allclose(info.samples, by_hand, rtol=1e-12)
    assert np.allclose(info.matrix, np.mean(by_hand, axis=0), rtol=1e-12)


def test_sf_information_noise_scaling():
    inst = build_instance([[0.5, 0.1], [0.0, 0.7]], [[1.0], [0.0]], Sigma_w=np.diag([2.0, 0.5]))
    p = Parametrization.unstructured_ab(inst)
    pol = PolicySpec.optimal()
    info = sf_information(inst, p, pol, 5, 2, seed=0)
    tr = simulate_batch(inst, pol, 5, 2, seed=0)
    z = np.concatenate([tr.x[0, :-1], tr.u[0]], axis=1)
    expected = np.kron(z.T @ z, np.diag([0.5, 2.0]))
    assert np.allclose(info.samples[0], expected, rtol=1e-12)


def test_score_oracle_small_sample(e1):
    p = Parametrization.unstructured_ab(e1)
    pol = PolicySpec.ce_dither(1.0)
    a = sf_information(e1, p, pol, 20, 20_000, seed=2)
    b = score_oracle_information(e1, p, pol, 20, 20_000, seed=2)
    diff = a.samples - b.samples
    se = diff.std(axis=0, ddof=1) / np.sqrt(diff.shape[0])
    assert np.all(np.abs(diff.mean(axis=0)) <= 3 * se)


def test_wrong_mode(e1, e_po):
    with pytest.raises(WrongMode):
        sf_information(e_po, Parametrization.b_only(e_po), PolicySpec.optimal(), 5, 2, 0)
    with pytest.raises(WrongMode):
        po_information_upper(e1, Parametrization.b_only(e1), PolicySpec.optimal(), 5, 2, 0)
    with pytest.raises(WrongMode):
        score_oracle_information(e_po, Parametrization.b_only(e_po), PolicySpec.optimal(), 5, 2, 0)


def test_po_information_is_psd(e_po):
    p = Parametrization.unstructured(e_po)
    info = po_information_upper(e_po, p, PolicySpec.optimal(), 10, 50, seed=0)
    assert info.matrix.shape == (p.d_theta, p.d_theta)
    assert np.all(np.linalg.eigvalsh(info.matrix) >= -1e-9)


def test_stationary_information_matches_simulation(e1):
    # state feedback starts in stationarity, so every step has the same expected information
    p = Parametrization.unstructured_ab(e1)
    T = 10
    mc = sf_information(e1, p, PolicySpec.optimal(), T, 40_000, seed=6)
    exact = optimal_policy_information(e1, p).matrix * T
    assert np.all(np.abs(mc.matrix - exact) <= 4 * mc.std_error)


def test_stationary_moment_po(e_po):
    G, Xi, K = e_po.gramian, e_po.filter.Xi, e_po.K
    M = stationary_state_input_moment(e_po)
    assert M.shape == (3, 3)
    assert M[0, 0] == pytest.approx(G[0, 0] + Xi[0, 0])
    assert np.allclose(M[1:, 1:], K @ G @ K.T)
    tr = simulate_batch(e_po, PolicySpec.optimal(), 60, 20_000, seed=3)
    x = tr.x[:, 50, 0]
    assert np.mean(x ** 2) == pytest.approx(M[0, 0], rel=0.05)


@pytest.mark.parametrize("dims", [(1, 1), (2, 1), (2, 2), (3, 2)])
def test_optimal_information_kernel(dims):
    dx, du = dims
    rng = np.random.default_rng(10 * dx + du)
    A, B = oracles.random_stabilizable(rng, dx, du)
    inst = build_instance(A, B)
    p = Parametrization.unstructured_ab(inst)
    info = optimal_policy_information(inst, p).matrix
    eig = np.linalg.eigvalsh(info)
    assert np.sum(eig <= 1e-6 * np.trace(info)) == dx * du
    V = kernel_basis(info, 1e-9)
    assert subspace_sin_distance(V, SubspaceBasis(oracles.explicit_singular_basis(inst.K))) <= 1e-6


def test_location_integral_cosine_bump():
    assert location_integral(cosine_bump()) == pytest.approx(np.pi ** 2, rel=1e-8)
    assert location_integral(cosine_bump(3.0, 0.5)) == pytest.approx(4 * np.pi ** 2, rel=1e-8)
    numeric = Prior(cosine_bump().density, None, -1.0, 1.0)
    assert location_integral(numeric) == pytest.approx(np.pi ** 2, rel=1e-5)
    with pytest.raises(InvalidPrior):
        cosine_bump(0.0, 0.0)


def test_prior_sampling_moments():
    rng = np.random.default_rng(0)
    draws = cosine_bump().sample(200_000, rng)
    assert np.all(np.abs(draws) <= 1)
    assert draws.mean() == pytest.approx(0.0, abs=0.01)
    assert draws.var() == pytest.approx(1 / 3 - 2 / np.pi ** 2, rel=0.02)


@pytest.mark.parametrize("sigma", [0.3, 1.0, 3.0])
def test_van_trees_small(sigma):
    res = van_trees_check(sigma, cosine_bump(), 20_000, seed=1)
    assert res.holds
    assert res.bayes_mse < sigma ** 2


def test_singular_noise_rejected():
    from lqgbounds.fisher import _precision

    with pytest.raises(NondegeneracyViolated):
        _precision(np.zeros((1, 1)), "Sigma_w")
