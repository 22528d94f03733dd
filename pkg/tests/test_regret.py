import numpy as np
import pytest

from lqgbounds.errors import InvalidInput
from lqgbounds.model import PolicySpec, simulate, simulate_batch
from lqgbounds.regret import (
    bellman_gap,
    optimal_cost,
    paired_regret,
    regret_direct,
    regret_representation,
    trajectory_cost,
)

K_E1 = -(1 + np.sqrt(5)) / 2
W_E1 = 1 + (2 + np.sqrt(5))


def test_bellman_gap_examples(e1):
    assert bellman_gap(e1, 1.0, 0.0) == pytest.approx(K_E1 ** 2 * W_E1, rel=1e-10)
    assert bellman_gap(e1, 1.0, K_E1) == pytest.approx(0.0, abs=1e-12)
    assert bellman_gap(e1, 0.0, 1.0) == pytest.approx(W_E1, rel=1e-10)
    batch = bellman_gap(e1, np.ones((3, 2, 1)), np.zeros((3, 2, 1)))
    assert batch.shape == (3, 2)


def test_optimal_cost_closed_form(e1):
    p = 2 + np.sqrt(5)
    gamma = 1 / (1 - ((3 - np.sqrt(5)) / 2) ** 2)
    assert optimal_cost(e1, 100) == pytest.approx(p * gamma + 100 * p, rel=1e-10)
    with pytest.raises(InvalidInput):
        optimal_cost(e1, 0)


def test_trajectory_cost_by_hand(e1):
    tr = simulate(e1, PolicySpec.linear_feedback([[-1.0]]), 3, seed=2)
    x, u = tr.x[:, 0], tr.u[:, 0]
    expected = float(np.sum(x[:-1] ** 2) + np.sum(u ** 2) + 7.0 * x[-1] ** 2)
    assert trajectory_cost(tr, [[1.0]], [[1.0]], [[7.0]]) == pytest.approx(expected)


def test_optimal_policy_has_zero_regret(e1):
    direct = regret_direct(e1, PolicySpec.optimal(), 30, 20_000, seed=1)
    assert abs(direct.value) <= 3 * direct.std_error
    rep = regret_representation(e1, PolicySpec.optimal(), 30, 100, seed=1)
    assert rep.value == pytest.approx(0.0, abs=1e-20)


def test_optimal_cost_partially_observed_uses_posterior_error(e_po):
    T, n = 20, 20_000
    traj = simulate_batch(e_po, PolicySpec.optimal(), T, n, seed=5)
    cost = trajectory_cost(traj, e_po.Q, e_po.R, e_po.P)
    se = cost.std(ddof=1) / np.sqrt(n)
    assert abs(cost.mean() - optimal_cost(e_po, T)) <= 3 * se
    # the prediction covariance in place of the posterior error covariance is rejected
    wrong = optimal_cost(e_po, T) + T * np.trace(e_po.Q @ (e_po.filter.S - e_po.filter.Xi))
    assert abs(cost.mean() - wrong) > 10 * se


def test_regret_grows_with_gain_error(e1):
    values = [regret_representation(e1, PolicySpec.linear_feedback(e1.K + d), 50, 500, seed=0).value
              for d in (0.05, 0.1, 0.2)]
    assert values[0] < values[1] < values[2]


def test_linear_feedback_regret_rate(e1):
    # stationary regret per step for a fixed gain k': (k' - k)^2 W Var(x)
    kp = e1.K[0, 0] + 0.1
    var = 1 / (1 - (2 + kp) ** 2)
    T = 200
    rep = regret_representation(e1, PolicySpec.linear_feedback([[kp]]), T, 4000, seed=3)
    # initial state is drawn from the optimal stationary law, so allow a transient
    assert rep.value / T == pytest.approx(0.01 * W_E1 * var, rel=0.05)


def test_paired_estimators_share_rollouts(e1):
    direct, rep, se = paired_regret(e1, PolicySpec.linear_feedback(e1.K + 0.1), 40, 2000, seed=4)
    assert direct.samples.shape == rep.samples.shape == (2000,)
    assert abs(direct.value - rep.value) <= 3 * se
