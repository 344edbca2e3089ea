import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import expit

from surrogate_itr.policy import (
    NO_BUDGET,
    budget_policy,
    cate,
    empirical_quantile,
    plugin_policy,
    policy_agreement,
    weighted_quantile,
    write_policy_csv,
)

taus = st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=80)
lams = st.floats(0.01, 1.0)


def test_cate_examples():
    np.testing.assert_array_equal(cate([0.3, 0.3], [0.3, 0.3]).values, 0.0)
    np.testing.assert_allclose(cate([0.6, 0.2], [0.5, 0.4]).values, [0.1, -0.2])
    assert expit(0.0) - expit(0.0) == 0.0
    with pytest.raises(ValueError):
        cate([1.0], [1.0, 2.0])


def test_quantile_examples():
    assert empirical_quantile([0.1, 0.2, 0.3, 0.4], 0.25) == 0.3
    assert empirical_quantile([0.1, 0.2], 1.0) == NO_BUDGET
    assert empirical_quantile([0.7] * 5, 0.5) == 0.7
    with pytest.raises(ValueError):
        empirical_quantile([0.1], 0.0)


def test_budget_policy_examples():
    np.testing.assert_array_equal(budget_policy([-1, 0.5, 2], 1.0).assignments, [0, 1, 1])
    p = budget_policy([0.1, 0.2, 0.3, 0.4], 0.25, threshold=0.3)
    np.testing.assert_array_equal(p.assignments, [0, 0, 0, 1])
    np.testing.assert_array_equal(budget_policy([-3, -1, -0.5], 0.5).assignments, 0)
    assert budget_policy([0.7] * 5, 0.5).treated_fraction == 0.0


def test_agreement_examples():
    assert policy_agreement([1, 0, 1], [1, 0, 1]) == 1.0
    assert policy_agreement([1, 0, 0], [0, 1, 0]) == 0.0
    assert policy_agreement([0, 0], [0, 0]) == 1.0


@settings(max_examples=200, deadline=None)
@given(taus, lams)
def test_feasibility_and_threshold(tau, lam):
    tau = np.array(tau)
    n = tau.size
    p = budget_policy(tau, lam)
    assert p.assignments.mean() <= lam + 1.0 / n + 1e-12
    if lam < 1.0:
        t = p.threshold
        assert t in tau
        assert np.mean(tau <= t) >= 1.0 - lam
        smaller = tau[tau < t]
        assert all(np.mean(tau <= s) < 1.0 - lam for s in smaller)


@settings(max_examples=200, deadline=None)
@given(taus, lams, lams)
def test_monotone_in_budget(tau, l1, l2):
    lo, hi = sorted((l1, l2))
    a = budget_policy(tau, lo).assignments
    b = budget_policy(tau, hi).assignments
    assert np.all(b >= a)


@given(taus)
def test_lambda_one_is_sign_rule(tau):
    np.testing.assert_array_equal(budget_policy(tau, 1.0, NO_BUDGET).assignments, plugin_policy(tau))


def test_weighted_quantile_equal_weights_matches_empirical():
    v = np.array([3.0, 1.0, 2.0, 5.0, 4.0])
    for lam in (0.2, 0.4, 0.6, 0.9):
        assert weighted_quantile(v, np.ones(5), lam) == empirical_quantile(v, lam)


def test_policy_csv(tmp_path):
    p = tmp_path / "pol.csv"
    write_policy_csv(p, [0.5, -1.0], budget_policy([0.5, -1.0], 1.0))
    assert p.read_text().splitlines() == ["row,tau,assignment", "0,0.5,1", "1,-1.0,0"]
