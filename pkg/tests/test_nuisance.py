import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import expit

from surrogate_itr.data import ObservationTable
from surrogate_itr.nuisance import (
    LogisticConfig,
    LogisticModel,
    MeanRegressor,
    SeparationError,
    StumpConfig,
    clip_propensity,
    dumps,
    fit_arm_regression,
    fit_logistic,
    fit_stump_ensemble,
    loads,
    predict_proba,
)
from surrogate_itr.simulation import gen_sim61

LOGIT_06 = math.log(0.6 / 0.4)  # 0.405465..., intercept-only MLE is logit(mean y)


def test_intercept_only_mle():
    X = np.zeros((10, 1))
    y = np.array([1.0] * 6 + [0.0] * 4)
    m = fit_logistic(X, y)
    assert m.intercept == pytest.approx(LOGIT_06, abs=1e-6)
    assert m.intercept == pytest.approx(0.405465, abs=1e-6)
    assert m.coefficients[0] == pytest.approx(0.0, abs=1e-9)


def test_single_class_without_ridge_raises():
    with pytest.raises(SeparationError):
        fit_logistic(np.random.default_rng(0).normal(size=(20, 1)), np.ones(20), LogisticConfig(ridge=0.0))


def test_separable_without_ridge_raises():
    x = np.linspace(-1, 1, 40)[:, None]
    with pytest.raises(SeparationError):
        fit_logistic(x, (x[:, 0] > 0).astype(float), LogisticConfig(ridge=0.0))


def test_logistic_consistency_large_n():
    rng = np.random.default_rng(3)
    X = rng.normal(0, 1, size=(100_000, 2))
    y = (rng.random(100_000) < expit(0.1 * X[:, 0] + 0.1 * X[:, 1])).astype(float)
    m = fit_logistic(X, y)
    np.testing.assert_allclose(m.coefficients, [0.1, 0.1], atol=0.05)
    assert m.converged


def test_irls_loglik_monotone(sim_table):
    m = fit_logistic(sim_table.covariates, sim_table.outcome)
    path = np.array(m.loglik_path)
    assert len(path) >= 2
    assert np.all(np.diff(path) >= -1e-12)


@pytest.mark.parametrize("eta, lo, hi", [(0.0, 0.5, 0.5), (40.0, 1 - 1e-15, 1.0), (-40.0, 0.0, 1e-15)])
def test_predict_saturation(eta, lo, hi):
    m = LogisticModel(eta, np.zeros(1), True, 0)
    p = predict_proba(m, np.zeros((1, 1)))[0]
    if lo == hi:
        assert p == lo
    else:
        assert lo < p < hi


def test_arm_regression_mean_constant():
    X = np.arange(6.0)[:, None]
    a = np.array([0, 1, 0, 1, 0, 1.0])
    y = np.where(a == 1, 2.5, -1.0)
    t = ObservationTable(X, a, y, None)
    m = fit_arm_regression(t, "outcome", 1, "mean")
    np.testing.assert_array_equal(m.predict(np.arange(10.0)[:, None]), 2.5)


def test_arm_regression_matches_generating_truth():
    d, _ = gen_sim61(100_000, seed=5)
    m = fit_arm_regression(d, "outcome", 1, "logistic")
    grid = np.random.default_rng(9).normal(0, 0.2, size=(5000, 2))
    truth = expit(grid @ np.array([0.3, 0.1]))
    pred = m.predict(grid)
    assert np.all((pred > 0) & (pred < 1))
    assert np.mean(np.abs(pred - truth)) < 0.02


def test_stumps_fit_step_function():
    rng = np.random.default_rng(1)
    X = rng.random((500, 2))
    y = np.where(X[:, 0] > 0.4, 2.0, -1.0)
    m = fit_stump_ensemble(X, y, StumpConfig(rounds=50))
    assert np.mean((m.predict(X) - y) ** 2) < 0.01 * y.var()
    assert np.all(np.diff(m.train_mse) <= 1e-12)


def test_stumps_rounds_zero_rejected():
    with pytest.raises(ValueError):
        fit_stump_ensemble(np.zeros((10, 1)), np.zeros(10), StumpConfig(rounds=0))


def test_stumps_constant_target():
    m = fit_stump_ensemble(np.random.default_rng(0).random((30, 2)), np.full(30, 3.25))
    np.testing.assert_allclose(m.predict(np.random.default_rng(1).random((7, 2))), 3.25)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(12, 120))
def test_boosting_mse_monotone(seed, n):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 2))
    y = X[:, 0] ** 2 + rng.normal(size=n)
    m = fit_stump_ensemble(X, y, StumpConfig(rounds=15, min_leaf=3))
    assert np.all(np.diff(m.train_mse) <= 1e-10)


def test_clip_examples():
    np.testing.assert_allclose(clip_propensity([0.0001, 0.5, 0.9999], 0.01), [0.01, 0.5, 0.99])
    with pytest.raises(ValueError):
        clip_propensity([0.5], 0.0)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=50), st.floats(1e-4, 0.49))
def test_clip_idempotent(e, eps):
    once = clip_propensity(e, eps)
    np.testing.assert_array_equal(clip_propensity(once, eps), once)


def test_serialization_roundtrip(sim_table):
    X = sim_table.covariates
    for m in (
        fit_logistic(X, sim_table.outcome),
        fit_stump_ensemble(X, sim_table.outcome, StumpConfig(rounds=5)),
        MeanRegressor(0.3),
    ):
        np.testing.assert_array_equal(loads(dumps(m)).predict(X), m.predict(X))
