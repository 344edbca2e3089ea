from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate
from scipy.special import expit
from scipy.stats import norm

from surrogate_itr.policy import budget_policy, policy_agreement
from surrogate_itr.simulation import (
    DgpSpec,
    ReplicationConfig,
    example1_correlation,
    example2_correlation,
    gen_appendix_s1,
    gen_example,
    gen_sim61,
    oracle_table,
    oracle_truth,
    run_replications,
    sign_rule_regret,
    true_cates,
)


def _p_y1_given_a1():
    """E[e(X) mu1(X)] / E[e(X)] by numeric integration over X ~ N(0, 0.04 I), truncated at 10 SD."""
    dens = lambda x1, x2: norm.pdf(x1, 0, 0.2) * norm.pdf(x2, 0, 0.2)
    e = lambda x1, x2: expit(0.1 * x1 + 0.1 * x2)
    num = integrate.dblquad(lambda x2, x1: dens(x1, x2) * e(x1, x2) * expit(0.3 * x1 + 0.1 * x2), -2, 2, -2, 2)[0]
    den = integrate.dblquad(lambda x2, x1: dens(x1, x2) * e(x1, x2), -2, 2, -2, 2)[0]
    return num / den


def test_sim61_treated_fraction():
    d, _ = gen_sim61(100_000, seed=1)
    assert abs(d.treatment.mean() - 0.5) <= 0.005


def test_sim61_outcome_rate_matches_quadrature():
    d, _ = gen_sim61(1_000_000, seed=2)
    y1 = d.outcome[d.treatment == 1]
    p = _p_y1_given_a1()
    assert p == pytest.approx(0.5, abs=0.01)
    assert abs(y1.mean() - p) <= 3 * np.sqrt(p * (1 - p) / y1.size)


@pytest.mark.parametrize("kind", ["sim61", "example1", "example2", "example3", "appendixS1"])
def test_consistency_construction(kind):
    d, pot = gen_example(kind, None, 5000, seed=3)
    a = d.treatment
    np.testing.assert_array_equal(d.outcome, a * pot.y1 + (1 - a) * pot.y0)
    np.testing.assert_array_equal(d.surrogate, a * pot.s1 + (1 - a) * pot.s0)


def test_generators_are_deterministic():
    a, _ = gen_example("example2", {"alpha": 1, "beta": 2}, 100, seed=8)
    b, _ = gen_example("example2", {"alpha": 1, "beta": 2}, 100, seed=8)
    np.testing.assert_array_equal(a.outcome, b.outcome)


@pytest.mark.parametrize("alpha, rho", [(1.0, 0.0), (3.0, 2.0 / 3.5)])
def test_example1_correlation(alpha, rho):
    assert example1_correlation(alpha) == pytest.approx(rho)
    d, _ = gen_example("example1", {"alpha": alpha}, 1_000_000, seed=4)
    assert abs(np.corrcoef(d.surrogate, d.outcome)[0, 1] - rho) <= 0.004


def test_example2_potential_correlation():
    assert example2_correlation(6.0) == 0.75
    _, pot = gen_example("example2", {"alpha": 1.0, "beta": 6.0}, 1_000_000, seed=5)
    assert abs(np.corrcoef(pot.s1, pot.y1)[0, 1] - 0.75) <= 0.004
    assert abs(np.corrcoef(pot.s0, pot.y0)[0, 1] - 0.75) <= 0.004


def test_example3_disjoint_rules():
    spec = DgpSpec("example3", {"alpha": 2.0, "beta": 1.0})
    x = np.random.default_rng(0).random(200_000)
    ty, ts = true_cates(spec, x)
    np.testing.assert_allclose(ts, 2 + x)
    np.testing.assert_allclose(ty, 2 - x)
    assert policy_agreement(budget_policy(ty, 0.5), budget_policy(ts, 0.5)) == 0.0


@pytest.mark.parametrize("params", [{"alpha": 0.0, "beta": 1.0}, {"alpha": 1.0, "beta": -1.0}, {"gamma": 1.0}])
def test_invalid_params(params):
    with pytest.raises(ValueError):
        DgpSpec("example3", params)


def test_appendix_exact_values():
    w = gen_appendix_s1()
    assert w.value(w.outcome_rule()) == Fraction(8, 3)
    assert w.value(w.surrogate_rule()) == 2
    for lam in (0.1, 0.5, 1):
        assert w.random_value(lam) == Fraction(7, 3)
    o = oracle_truth(DgpSpec("appendixS1"), None)
    assert o.mc_se == {"regret": 0.0, "gain": 0.0, "efficiency": 0.0}
    assert (o.analytic["R"], o.analytic["G"], o.analytic["V"]) == (Fraction(2, 3), Fraction(-1, 3), Fraction(-1, 3))
    # regret of the surrogate rule is the value gap 8/3 - 2
    assert o.analytic["R"] == w.value(w.outcome_rule()) - w.value(w.surrogate_rule())


def test_oracle_sign_rule_cross_check():
    spec = DgpSpec()
    o = oracle_truth(spec, 1.0, draws=2_000_000, seed=10)
    r2, se2 = sign_rule_regret(spec, draws=2_000_000, seed=99)
    assert abs(o.R - r2) <= 4 * np.hypot(o.mc_se["regret"], se2)


def test_oracle_example3_analytic_agreement():
    spec = DgpSpec("example3", {"alpha": 0.5, "beta": 1.0})
    for lam, o in oracle_table(spec, [0.2, 0.5, 0.8, None], 2_000_000, seed=3).items():
        for key, metric in (("R", "regret"), ("G", "gain"), ("V", "efficiency")):
            assert abs(o.value(metric) - o.analytic[key]) <= 4 * o.mc_se[metric] + 1e-6


def test_oracle_nonnegative_regret_and_mc_scaling():
    spec = DgpSpec()
    small = oracle_table(spec, [0.1, 0.3, None], 1_000_000, seed=1)
    big = oracle_table(spec, [0.1, 0.3, None], 4_000_000, seed=1)
    for lam in small:
        assert small[lam].R >= -4 * small[lam].mc_se["regret"]
        ratio = small[lam].mc_se["gain"] / big[lam].mc_se["gain"]
        assert 1.8 < ratio < 2.2


def test_oracle_efficiency_is_gain_minus_budget_ate():
    spec = DgpSpec("example3", {"alpha": 1.0, "beta": 0.5})
    o = oracle_truth(spec, 0.3, draws=1_000_000)
    assert o.V == pytest.approx(o.G - 0.3 * o.ate, abs=1e-12)


def test_oracle_zero_regret_when_surrogate_is_outcome(monkeypatch):
    from surrogate_itr.simulation import oracle as oracle_mod

    spec = DgpSpec()
    real = oracle_mod.true_cates
    monkeypatch.setattr(oracle_mod, "true_cates", lambda s, X: (real(s, X)[0],) * 2)
    for o in oracle_table(spec, [None, 0.2], 10**6).values():
        assert o.R == 0.0


def test_oracle_warns_on_few_draws():
    o = oracle_truth(DgpSpec(), 0.2, draws=10)
    assert o.warnings


def test_constant_cate_oracle():
    o = oracle_table(DgpSpec("example2", {"alpha": 1.0, "beta": 6.0}), [None, 0.5])
    assert o[None].R == 1.0  # tau_Y = 1 > 0 but the surrogate rule treats nobody
    assert o[0.5].R == 0.0 and o[0.5].G == 0.0


def test_replication_smoke_and_thread_invariance():
    cfg = ReplicationConfig(n=200, reps=4, oracle_draws=10**6, seed=3)
    a = run_replications(cfg, threads=1)
    b = run_replications(cfg, threads=2)
    assert a.failures == 0
    assert len(a.rows) == 13
    assert set(a.diagnostics) == {"e", "mu0", "mu1", "tau_y", "tau_s"}
    assert all(0 < v < 1 for v in a.diagnostics.values())
    assert a.diagnostics == b.diagnostics
    for ra, rb in zip(a.rows, b.rows):
        assert ra == rb
        assert np.isfinite([ra.bias, ra.sd, ra.cp95]).all()


def test_replication_validation():
    with pytest.raises(ValueError):
        ReplicationConfig(reps=1)


def test_replication_oracle_nuisance_mode():
    cfg = ReplicationConfig(n=500, reps=3, oracle_draws=10**6, nuisance="oracle", seed=1)
    rep = run_replications(cfg)
    assert rep.failures == 0
    assert rep.row("gain", 0.1).n == 500
    assert rep.diagnostics == {}


def test_replication_split_layout_and_failures():
    cfg = ReplicationConfig(n=200, reps=3, oracle_draws=10**6, layout="split", seed=2)
    assert run_replications(cfg).failures == 0
    bad = ReplicationConfig(n=3, reps=2, oracle_draws=10**6, seed=2)
    rep = run_replications(bad)
    assert rep.failures == 2 and len(rep.errors) == 2
