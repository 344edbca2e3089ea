"""Monte Carlo replication study: bias, SD and CI coverage against oracle truth."""

from __future__ import annotations

import dataclasses
import functools
from dataclasses import dataclass, field

import numpy as np

from .. import _parallel, seeding
from ..crossfit import EstimatorConfig, Pipeline, attach_bootstrap, bootstrap_ci, fit_nuisance
from ..estimators import METRICS, influence_values, summarize
from .dgp import DgpSpec, gen_example, true_cates, true_regressors
from .oracle import oracle_table

LAYOUTS = ("single", "split")


@dataclass(frozen=True)
class ReplicationConfig:
    spec: DgpSpec = field(default_factory=DgpSpec)
    n: int = 1000
    reps: int = 1000
    lambdas: tuple = (0.1, 0.2, 0.3, 0.4)
    unconstrained: bool = True
    layout: str = "single"
    estimator: EstimatorConfig = field(default_factory=lambda: EstimatorConfig(folds=2))
    nuisance: str = "fitted"  # or "oracle": inject the true regression functions
    ci: str = "analytic"  # or "bootstrap"
    B: int = 200
    level: float = 0.95
    seed: int = 0
    oracle_draws: int = 10**7
    metrics: tuple = METRICS

    def __post_init__(self):
        if self.reps < 2:
            raise ValueError(f"need reps >= 2, got {self.reps}")
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.layout not in LAYOUTS:
            raise ValueError(f"layout must be one of {LAYOUTS}")
        if self.nuisance not in ("fitted", "oracle"):
            raise ValueError("nuisance must be 'fitted' or 'oracle'")
        if self.ci not in ("analytic", "bootstrap"):
            raise ValueError("ci must be 'analytic' or 'bootstrap'")
        if self.spec.kind == "appendixS1":
            raise ValueError("appendixS1 has no outcome noise to replicate over; use the oracle")

    @property
    def budgets(self) -> list:
        return ([None] if self.unconstrained else []) + [float(lam) for lam in self.lambdas]

    @property
    def keys(self) -> list:
        keys = [("regret", None)] if self.unconstrained and "regret" in self.metrics else []
        keys += [(m, float(lam)) for m in self.metrics for lam in self.lambdas]
        return keys


@dataclass(frozen=True)
class ReportRow:
    metric: str
    lam: float | None
    n: int
    reps: int
    bias: float
    sd: float
    cp95: float
    failures: int
    truth: float
    mean_se: float

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "lambda": self.lam,
            "n": self.n,
            "reps": self.reps,
            "bias": self.bias,
            "sd": self.sd,
            "cp95": self.cp95,
            "failures": self.failures,
            "truth": self.truth,
            "mean_se": self.mean_se,
        }


@dataclass(frozen=True, eq=False)
class ReplicationReport:
    config: ReplicationConfig
    rows: tuple
    oracle: dict
    points: dict  # key -> array over successful replications
    failures: int
    errors: tuple
    # mean over replications of RMSE(fitted - true) for each nuisance; empty in oracle mode
    diagnostics: dict = field(default_factory=dict)

    def row(self, metric: str, lam) -> ReportRow:
        lam = None if lam is None else float(lam)
        for r in self.rows:
            if r.metric == metric and r.lam == lam:
                return r
        raise KeyError((metric, lam))


def replicate_data(cfg: ReplicationConfig, rep_seed: int):
    """The dataset(s) for one replication: ``[d]`` or ``[d1, d2]``."""
    spec = cfg.spec
    d, _ = gen_example(spec.kind, spec.params, cfg.n, rep_seed)
    if cfg.layout == "single":
        return [d]
    d2, _ = gen_example(spec.kind, spec.params, cfg.n, seeding.derive_seed(rep_seed, seeding.DATA))
    return [d.with_columns(surrogate=None), d2.with_columns(outcome=None)]


def _oracle_overrides(cfg: ReplicationConfig, oracle: dict) -> dict:
    ov = true_regressors(cfg.spec)
    ov["thresholds"] = {
        lam: (oracle[lam].threshold_y, oracle[lam].threshold_s) for lam in cfg.budgets if lam is not None
    }
    return ov


def _one_rep(rep: int, cfg: ReplicationConfig, overrides):
    rep_seed = seeding.derive_seed(cfg.seed, seeding.REPLICATE, rep)
    est_seed = seeding.derive_seed(rep_seed, seeding.SPLIT)
    data = replicate_data(cfg, rep_seed)
    try:
        if cfg.nuisance == "oracle":
            target = data[0]
            fit = fit_nuisance(target, target, target, target.covariates, cfg.budgets, cfg.estimator, overrides)
            cates = fit.policy_cates(target.covariates)
            out = {}
            for lam in cfg.budgets:
                vals = influence_values(target, fit.bundle(target.covariates, lam, cates))
                for m in cfg.metrics:
                    e = summarize(vals[m], m, lam, cfg.level)
                    out[(m, lam)] = (e.point, e.ci[0], e.ci[1], e.analytic_se)
            return out, None
        pipeline = Pipeline(cfg.layout, tuple(cfg.budgets), cfg.estimator, tuple(cfg.metrics))
        res = pipeline.run(data, est_seed)
        diag = _nuisance_errors(cfg, data, res)
        if cfg.ci == "bootstrap":
            boot = bootstrap_ci(data, pipeline, cfg.B, cfg.level, seeding.derive_seed(rep_seed, seeding.BOOTSTRAP))
            res = attach_bootstrap(res, boot)
            out = {k: (e.point, *e.bootstrap_ci, e.analytic_se) for k, e in res.estimates.items()}
        else:
            out = {k: (e.point, e.ci[0], e.ci[1], e.analytic_se) for k, e in res.estimates.items()}
        out["diagnostics"] = diag
        return out, None
    except Exception as exc:  # noqa: BLE001 - a failed replication is recorded, not fatal
        return None, f"rep {rep}: {type(exc).__name__}: {exc}"


def _nuisance_errors(cfg: ReplicationConfig, data, res) -> dict:
    """RMSE of each fitted nuisance against the truth over the scored rows."""
    d = data[0]
    if cfg.layout == "split" and (cfg.estimator.folds or 1) == 1:
        X = d.covariates[np.concatenate([r.eval_rows for r in res.records])]
    else:
        X = d.covariates
    truth = true_regressors(cfg.spec)
    ty, ts = true_cates(cfg.spec, X)
    b = res.bundles[cfg.budgets[0]]

    def rmse(u, v):
        return float(np.sqrt(np.mean((u - v) ** 2)))

    return {
        "e": rmse(b.e, truth["propensity"].predict(X)),
        "mu0": rmse(b.mu0, truth["outcome0"].predict(X)),
        "mu1": rmse(b.mu1, truth["outcome1"].predict(X)),
        "tau_y": rmse(b.tau_y, ty),
        "tau_s": rmse(b.tau_s, ts),
    }


def run_replications(cfg: ReplicationConfig, threads: int = 1, oracle: dict | None = None) -> ReplicationReport:
    """Run ``cfg.reps`` independent replications and summarize them per (metric, budget).

    Replication ``r`` draws its data and splits from seeds derived from
    ``(cfg.seed, r)`` only, and results are reduced in replication order, so
    the report does not depend on ``threads``.
    """
    if oracle is None:
        oracle = oracle_table(cfg.spec, cfg.budgets, cfg.oracle_draws, seeding.derive_seed(cfg.seed, seeding.ORACLE))
    overrides = _oracle_overrides(cfg, oracle) if cfg.nuisance == "oracle" else None
    work = functools.partial(_one_rep, cfg=cfg, overrides=overrides)
    results = _parallel.ordered_map(work, range(cfg.reps), threads)
    ok = [r for r, _ in results if r is not None]
    errors = tuple(err for _, err in results if err is not None)
    failures = len(errors)

    rows, points = [], {}
    for key in cfg.keys:
        metric, lam = key
        truth = oracle[lam].value(metric)
        arr = np.array([r[key] for r in ok]) if ok else np.empty((0, 4))
        points[key] = arr[:, 0].copy()
        if arr.shape[0] >= 2:
            bias = float(arr[:, 0].mean() - truth)
            sd = float(arr[:, 0].std(ddof=1))
            cover = float(np.mean((arr[:, 1] <= truth) & (truth <= arr[:, 2])))
            mean_se = float(arr[:, 3].mean())
        else:
            bias = sd = cover = mean_se = float("nan")
        rows.append(ReportRow(metric, lam, cfg.n, cfg.reps, bias, sd, cover, failures, truth, mean_se))
    diag = [r["diagnostics"] for r in ok if "diagnostics" in r]
    diagnostics = {k: float(np.mean([dg[k] for dg in diag])) for k in diag[0]} if diag else {}
    return ReplicationReport(cfg, tuple(rows), oracle, points, failures, errors, diagnostics)


def replication_config_dict(cfg: ReplicationConfig) -> dict:
    d = dataclasses.asdict(cfg)
    d["spec"] = {"kind": cfg.spec.kind, "params": dict(cfg.spec.params)}
    d["lambdas"] = list(cfg.lambdas)
    d["metrics"] = list(cfg.metrics)
    return d


__all__ = ["ReplicationConfig", "ReplicationReport", "ReportRow", "run_replications", "replicate_data"]
