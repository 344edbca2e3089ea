import numpy as np
import pytest

from surrogate_itr import (
    EstimationError,
    EstimatorConfig,
    Pipeline,
    attach_bootstrap,
    bootstrap_ci,
    crossfit_single,
    crossfit_split,
)
from surrogate_itr.nuisance import MeanRegressor
from surrogate_itr.simulation import gen_sim61

LAMS = (None, 0.1, 0.2, 0.3, 0.4, 1.0)


@pytest.fixture(scope="module")
def d():
    return gen_sim61(600, seed=21)[0]


@pytest.fixture(scope="module")
def two(d):
    d2 = gen_sim61(500, seed=22)[0]
    return d.with_columns(surrogate=None), d2.with_columns(outcome=None)


def _results(d, two):
    cfgs = [EstimatorConfig(folds=2), EstimatorConfig(folds=3, subsplit=True), EstimatorConfig(outcome_kind="stumps")]
    for cfg in cfgs:
        yield crossfit_single(d, LAMS, cfg, seed=5)
    yield crossfit_split(*two, LAMS, EstimatorConfig(), seed=5)
    yield crossfit_split(*two, LAMS, EstimatorConfig(folds=4), seed=5)


def test_lambda_one_equals_unconstrained_bitwise(d, two):
    for res in _results(d, two):
        for m in ("regret", "gain", "efficiency"):
            assert np.array_equal(res.scores[(m, None)], res.scores[(m, 1.0)])
            assert res.estimates[(m, None)].point == res.estimates[(m, 1.0)].point


def test_efficiency_identity_on_fits(d, two):
    for res in _results(d, two):
        for lam in LAMS:
            budget = 1.0 if lam is None else lam
            lhs = res.estimates[("efficiency", lam)].point
            rhs = res.estimates[("gain", lam)].point - budget * res.ate_scores.mean()
            assert abs(lhs - rhs) <= 1e-12


def test_budget_feasibility_on_every_fitted_policy(d, two):
    for res in _results(d, two):
        for fit in res.fits:
            n_pool = fit.pool_tau_y.shape[0]
            for lam in LAMS:
                if lam is None:
                    continue
                ty, ts = fit.thresholds[lam]
                for tau, thr in ((fit.pool_tau_y, ty), (fit.pool_tau_s, ts)):
                    treated = np.mean((tau > thr) & (tau > 0))
                    assert treated <= lam + 1.0 / n_pool


def test_surrogate_equal_outcome_gives_zero_regret(d):
    same = d.with_columns(surrogate=d.outcome)
    for cfg in (EstimatorConfig(folds=2), EstimatorConfig(outcome_kind="stumps", surrogate_kind="stumps")):
        res = crossfit_single(same, LAMS, cfg, seed=9)
        for lam in LAMS:
            assert res.estimates[("regret", lam)].point == 0.0


def test_split_layout_sizes(two):
    d1, d2 = two
    res = crossfit_split(d1, d2, (0.2,), EstimatorConfig(), seed=1)
    assert res.estimates[("regret", 0.2)].n_main == d1.n // 2
    (rec,) = res.records
    assert not set(rec.eval_rows) & set(rec.outcome_rows)
    assert res.fits[0].pool_tau_y.shape[0] == d1.n - d1.n // 2 + d2.n
    kres = crossfit_split(d1, d2, (0.2,), EstimatorConfig(folds=3), seed=1)
    assert kres.estimates[("regret", 0.2)].n_main == d1.n


def test_crossfit_folds_are_disjoint_from_training(d):
    res = crossfit_single(d, (0.3,), EstimatorConfig(folds=4, subsplit=True), seed=2)
    seen = np.concatenate([r.eval_rows for r in res.records])
    np.testing.assert_array_equal(np.sort(seen), np.arange(d.n))
    for r in res.records:
        assert not set(r.eval_rows) & (set(r.outcome_rows) | set(r.surrogate_rows))
        assert not set(r.outcome_rows) & set(r.surrogate_rows)


def test_deterministic_in_seed(d):
    a = crossfit_single(d, LAMS, EstimatorConfig(folds=2), seed=3).points()
    b = crossfit_single(d, LAMS, EstimatorConfig(folds=2), seed=3).points()
    c = crossfit_single(d, LAMS, EstimatorConfig(folds=2), seed=4).points()
    assert a == b and a != c


def test_missing_columns_and_bad_folds(d, two):
    with pytest.raises(EstimationError):
        crossfit_single(d.with_columns(surrogate=None), (0.1,))
    with pytest.raises(EstimationError):
        crossfit_split(two[1], two[0], (0.1,))
    with pytest.raises(EstimationError):
        crossfit_single(d, (0.1,), EstimatorConfig(folds=10_000))
    with pytest.raises(ValueError):
        crossfit_single(d, (0.0,))


def test_overrides_replace_fitted_nuisances(d):
    res = crossfit_single(d, (0.2,), EstimatorConfig(folds=2), seed=1, overrides={"propensity": MeanRegressor(0.5)})
    np.testing.assert_array_equal(res.bundles[0.2].e, 0.5)


def test_bootstrap_zero_width_on_constant_scores(d):
    same = d.with_columns(surrogate=d.outcome)
    pipe = Pipeline("single", (0.2,), EstimatorConfig(folds=2), ("regret",))
    boot = bootstrap_ci([same], pipe, B=200, seed=1)
    assert boot.intervals[("regret", 0.2)] == (0.0, 0.0)
    assert boot.b_effective == 200 and boot.b_skipped == 0


def test_bootstrap_contract(two):
    pipe = Pipeline("split", (0.2,), EstimatorConfig(), ("gain",))
    with pytest.raises(ValueError):
        bootstrap_ci(list(two), pipe, B=99)
    a = bootstrap_ci(list(two), pipe, B=100, seed=4, threads=1)
    b = bootstrap_ci(list(two), pipe, B=100, seed=4, threads=2)
    assert a.intervals == b.intervals and a.se == b.se
    lo, hi = a.intervals[("gain", 0.2)]
    assert lo < hi
    res = attach_bootstrap(pipe.run(list(two), 0), a)
    est = res.estimates[("gain", 0.2)]
    assert est.bootstrap_ci == (lo, hi) and est.to_dict()["B_effective"] == 100


class _Flaky:
    """Pipeline stand-in that fails whenever the derived resample seed is divisible by 3."""

    layout = "single"

    def run(self, datasets, seed):
        if seed % 3 == 0:
            raise EstimationError("fit", "synthetic failure")
        return crossfit_single(datasets[0], (0.2,), EstimatorConfig(folds=2), seed)


def test_bootstrap_skips_failed_resamples(d):
    boot = bootstrap_ci([d], _Flaky(), B=100, seed=0)
    assert boot.b_effective + boot.b_skipped == 100
    assert 0 < boot.b_skipped < 100
