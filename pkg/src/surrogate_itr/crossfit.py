"""Sample-split and cross-fitted estimation pipelines, plus the full-pipeline bootstrap.

Two data layouts are supported:

* ``crossfit_split``: an outcome dataset ``d1`` (A, X, Y) and a surrogate
  dataset ``d2`` (A, X, S). With ``folds == 1`` ``d1`` is split once into a
  main and an auxiliary half; with ``folds >= 2`` every row of ``d1`` is
  scored by nuisances fitted on the other folds. Surrogate regressions and
  the propensity always come from ``d2``.
* ``crossfit_single``: one dataset carrying both Y and S, K-fold cross-fitted.

Policy thresholds are always empirical quantiles over the auxiliary rows of
the fold (auxiliary part of ``d1`` plus all of ``d2`` in the split layout).
"""

from __future__ import annotations

import dataclasses
import functools
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from . import _parallel, seeding
from .data import ObservationTable, kfold, split_half
from .estimators import METRICS, MetricEstimate, NuisanceBundle, influence_values, summarize
from .nuisance import (
    KINDS,
    NuisanceConfig,
    clip_propensity,
    fit_arm_regression,
    fit_propensity,
)
from .policy import NO_BUDGET, budget_assignments, empirical_quantile, plugin_policy


class EstimationError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


@dataclass(frozen=True)
class EstimatorConfig:
    outcome_kind: str = "logistic"
    surrogate_kind: str = "logistic"
    propensity_kind: str = "logistic"
    # separate CATE learner for the policies; None reuses the outcome/surrogate fits
    policy_kind: str | None = None
    folds: int | None = None
    fraction: float = 0.5
    # Algorithm-2 style disjoint outcome/surrogate halves inside each training fold
    subsplit: bool = False
    clip: float = 0.01
    level: float = 0.95
    nuisance: NuisanceConfig = field(default_factory=NuisanceConfig)

    def __post_init__(self):
        for name in ("outcome_kind", "surrogate_kind", "propensity_kind"):
            if getattr(self, name) not in KINDS:
                raise ValueError(f"{name} must be one of {KINDS}")
        if self.policy_kind is not None and self.policy_kind not in KINDS:
            raise ValueError(f"policy_kind must be one of {KINDS} or None")
        if self.folds is not None and self.folds < 1:
            raise ValueError("folds must be >= 1")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# fitted nuisances
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NuisanceFit:
    """Fitted regressors plus per-budget thresholds from the quantile pool."""

    outcome0: object
    outcome1: object
    surrogate0: object
    surrogate1: object
    propensity: object
    policy_y: tuple | None
    policy_s: tuple | None
    thresholds: dict
    clip: float
    pool_tau_y: np.ndarray | None = None
    pool_tau_s: np.ndarray | None = None

    def policy_cates(self, X):
        py = self.policy_y or (self.outcome0, self.outcome1)
        ps = self.policy_s or (self.surrogate0, self.surrogate1)
        return py[1].predict(X) - py[0].predict(X), ps[1].predict(X) - ps[0].predict(X)

    def bundle(self, X, lam: float | None, cates=None) -> NuisanceBundle:
        """Predictions on ``X``; ``lam=None`` is the unconstrained sign rule."""
        mu0 = self.outcome0.predict(X)
        mu1 = self.outcome1.predict(X)
        e = clip_propensity(self.propensity.predict(X), self.clip)
        tau_y, tau_s = cates if cates is not None else self.policy_cates(X)
        if lam is None:
            return NuisanceBundle(mu0, mu1, e, tau_y, tau_s, plugin_policy(tau_y), plugin_policy(tau_s), None)
        ty, ts = self.thresholds[lam]
        return NuisanceBundle(
            mu0, mu1, e, tau_y, tau_s,
            budget_assignments(tau_y, ty), budget_assignments(tau_s, ts), lam, ty, ts,
        )


def fit_nuisance(
    outcome_data: ObservationTable,
    surrogate_data: ObservationTable,
    propensity_data: ObservationTable,
    pool_X: np.ndarray,
    lambdas,
    config: EstimatorConfig = EstimatorConfig(),
    overrides: dict | None = None,
) -> NuisanceFit:
    """Fit every nuisance and the budget thresholds.

    ``overrides`` may replace any of ``outcome0``, ``outcome1``, ``surrogate0``,
    ``surrogate1``, ``propensity`` with an already-fitted regressor, and may
    carry ``thresholds`` ({lam: (t_y, t_s)}) to bypass the quantile step.
    """
    overrides = dict(overrides or {})
    cfg = config.nuisance

    def get(name, fit):
        if name in overrides:
            return overrides[name]
        try:
            return fit()
        except Exception as exc:  # noqa: BLE001 - rewrapped with the stage name
            raise EstimationError(f"fit {name}", str(exc)) from exc

    o0 = get("outcome0", lambda: fit_arm_regression(outcome_data, "outcome", 0, config.outcome_kind, cfg))
    o1 = get("outcome1", lambda: fit_arm_regression(outcome_data, "outcome", 1, config.outcome_kind, cfg))
    s0 = get("surrogate0", lambda: fit_arm_regression(surrogate_data, "surrogate", 0, config.surrogate_kind, cfg))
    s1 = get("surrogate1", lambda: fit_arm_regression(surrogate_data, "surrogate", 1, config.surrogate_kind, cfg))
    prop = get("propensity", lambda: fit_propensity(propensity_data, config.propensity_kind, cfg))
    policy_y = policy_s = None
    if config.policy_kind is not None:
        k = config.policy_kind
        policy_y = (
            get("policy_y0", lambda: fit_arm_regression(outcome_data, "outcome", 0, k, cfg)),
            get("policy_y1", lambda: fit_arm_regression(outcome_data, "outcome", 1, k, cfg)),
        )
        policy_s = (
            get("policy_s0", lambda: fit_arm_regression(surrogate_data, "surrogate", 0, k, cfg)),
            get("policy_s1", lambda: fit_arm_regression(surrogate_data, "surrogate", 1, k, cfg)),
        )

    fit = NuisanceFit(o0, o1, s0, s1, prop, policy_y, policy_s, {}, config.clip)
    thresholds = overrides.get("thresholds")
    pool_ty = pool_ts = None
    if thresholds is None:
        pool_ty, pool_ts = fit.policy_cates(pool_X)
        thresholds = {}
        for lam in lambdas:
            if lam is None:
                continue
            thresholds[lam] = (empirical_quantile(pool_ty, lam), empirical_quantile(pool_ts, lam))
    return dataclasses.replace(fit, thresholds=dict(thresholds), pool_tau_y=pool_ty, pool_tau_s=pool_ts)


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FoldRecord:
    """Row bookkeeping for one fitted nuisance set (indices into the named dataset)."""

    eval_rows: np.ndarray
    outcome_rows: np.ndarray
    surrogate_rows: np.ndarray
    propensity_rows: np.ndarray
    eval_dataset: str
    surrogate_dataset: str


@dataclass(frozen=True, eq=False)
class CrossFitResult:
    estimates: dict
    scores: dict
    ate_scores: np.ndarray
    records: tuple
    fits: tuple
    bundles: dict

    def points(self) -> dict:
        return {key: est.point for key, est in self.estimates.items()}

    def ordered(self) -> list[MetricEstimate]:
        return list(self.estimates.values())


def _normalize_lambdas(lambdas):
    out = []
    for lam in lambdas:
        if lam is not None:
            lam = float(lam)
            if not 0.0 < lam <= 1.0:
                raise ValueError(f"budget lambda must lie in (0, 1], got {lam}")
        if lam not in out:
            out.append(lam)
    if not out:
        raise ValueError("need at least one budget value")
    return out


def _assemble(eval_table, fold_rows, fold_bundles, lambdas, metrics, level, records, fits):
    order = np.concatenate(fold_rows)
    estimates, scores, bundles = {}, {}, {}
    ate = None
    for lam in lambdas:
        bundle = NuisanceBundle.concat([fb[lam] for fb in fold_bundles], order)
        vals = influence_values(eval_table, bundle)
        bundles[lam] = bundle
        if ate is None:
            ate = vals["ate"]
        for metric in metrics:
            scores[(metric, lam)] = vals[metric]
            estimates[(metric, lam)] = summarize(vals[metric], metric, lam, level)
    return CrossFitResult(estimates, scores, ate, tuple(records), tuple(fits), bundles)


def _require(table, column, label):
    if getattr(table, column) is None:
        raise EstimationError("input", f"{label} has no {column} column")


def crossfit_split(
    d1: ObservationTable,
    d2: ObservationTable,
    lambdas,
    config: EstimatorConfig = EstimatorConfig(),
    seed: int = 0,
    metrics=METRICS,
    overrides: dict | None = None,
) -> CrossFitResult:
    """Two-dataset estimation: single split (folds == 1) or K-fold over ``d1``."""
    _require(d1, "outcome", "outcome dataset")
    _require(d2, "surrogate", "surrogate dataset")
    lambdas = _normalize_lambdas(lambdas)
    k = config.folds or 1
    d2_rows = np.arange(d2.n)

    if k == 1:
        if d1.n < 2:
            raise EstimationError("split", "outcome dataset needs at least 2 rows")
        plan = split_half(d1, config.fraction, seed)
        parts = [(plan.main_indices, plan.aux_indices)]
    else:
        if not 2 <= k <= d1.n:
            raise EstimationError("split", f"cannot cut {d1.n} rows into {k} folds")
        folds = kfold(d1.n, k, seed)
        everything = np.arange(d1.n)
        parts = [(f, np.setdiff1d(everything, f, assume_unique=True)) for f in folds]

    fold_rows, fold_bundles, records, fits = [], [], [], []
    for eval_idx, aux_idx in parts:
        aux = d1.take(aux_idx)
        pool = np.vstack([aux.covariates, d2.covariates])
        fit = fit_nuisance(aux, d2, d2, pool, lambdas, config, overrides)
        X = d1.covariates[eval_idx]
        cates = fit.policy_cates(X)
        fold_bundles.append({lam: fit.bundle(X, lam, cates) for lam in lambdas})
        fold_rows.append(np.asarray(eval_idx))
        records.append(FoldRecord(np.asarray(eval_idx), np.asarray(aux_idx), d2_rows, d2_rows, "d1", "d2"))
        fits.append(fit)

    order = np.concatenate(fold_rows)
    eval_table = d1.take(order) if k == 1 else d1
    if k == 1:
        # single split: score the main half only, in its own row order
        fold_rows = [np.arange(order.shape[0])]
    return _assemble(eval_table, fold_rows, fold_bundles, lambdas, metrics, config.level, records, fits)


def crossfit_single(
    d: ObservationTable,
    lambdas,
    config: EstimatorConfig = EstimatorConfig(),
    seed: int = 0,
    metrics=METRICS,
    overrides: dict | None = None,
) -> CrossFitResult:
    """One dataset with Y and S, K-fold cross-fitted (K from ``config.folds``, default 5)."""
    _require(d, "outcome", "dataset")
    _require(d, "surrogate", "dataset")
    lambdas = _normalize_lambdas(lambdas)
    k = config.folds or 5
    if not 2 <= k <= d.n:
        raise EstimationError("split", f"need 2 <= K <= n, got K={k}, n={d.n}")
    folds = kfold(d.n, k, seed)
    everything = np.arange(d.n)

    fold_rows, fold_bundles, records, fits = [], [], [], []
    for j, eval_idx in enumerate(folds):
        comp = np.setdiff1d(everything, eval_idx, assume_unique=True)
        if config.subsplit:
            if comp.shape[0] < 2:
                raise EstimationError("split", "training fold too small to sub-split")
            sub = split_half(comp.shape[0], 0.5, seeding.derive_seed(seed, seeding.SPLIT, j))
            out_idx, sur_idx = comp[sub.main_indices], comp[sub.aux_indices]
        else:
            out_idx = sur_idx = comp
        out_t, sur_t = d.take(out_idx), d.take(sur_idx)
        fit = fit_nuisance(out_t, sur_t, sur_t, d.covariates[comp], lambdas, config, overrides)
        X = d.covariates[eval_idx]
        cates = fit.policy_cates(X)
        fold_bundles.append({lam: fit.bundle(X, lam, cates) for lam in lambdas})
        fold_rows.append(eval_idx)
        records.append(FoldRecord(eval_idx, out_idx, sur_idx, sur_idx, "d", "d"))
        fits.append(fit)
    return _assemble(d, fold_rows, fold_bundles, lambdas, metrics, config.level, records, fits)


# ---------------------------------------------------------------------------
# bootstrap
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Pipeline:
    """Picklable description of an estimation run, rerun on every bootstrap resample."""

    layout: str  # "split" or "single"
    lambdas: tuple
    config: EstimatorConfig = EstimatorConfig()
    metrics: tuple = METRICS

    def run(self, datasets, seed: int) -> CrossFitResult:
        if self.layout == "split":
            return crossfit_split(datasets[0], datasets[1], self.lambdas, self.config, seed, self.metrics)
        if self.layout == "single":
            return crossfit_single(datasets[0], self.lambdas, self.config, seed, self.metrics)
        raise ValueError(f"unknown layout {self.layout!r}")


@dataclass(frozen=True)
class BootstrapResult:
    intervals: dict  # (metric, lam) -> (lo, hi)
    se: dict  # (metric, lam) -> bootstrap SD
    b_effective: int
    b_skipped: int
    level: float


def _one_resample(b, datasets, pipeline, seed):
    for attempt in range(2):
        rng = seeding.generator(seed, seeding.BOOTSTRAP, b, attempt)
        sample = [t.take(rng.integers(0, t.n, size=t.n)) for t in datasets]
        try:
            res = pipeline.run(sample, seeding.derive_seed(seed, seeding.BOOTSTRAP, b, attempt))
        except (EstimationError, ValueError, np.linalg.LinAlgError):
            continue
        return res.points()
    return None


def bootstrap_ci(datasets, pipeline: Pipeline, B: int = 1000, level: float = 0.95, seed: int = 0, threads: int = 1) -> BootstrapResult:
    """Nonparametric bootstrap of the whole pipeline with percentile intervals.

    Each resample draws rows with replacement within every dataset and refits
    all nuisances. A failing resample is retried once with a fresh draw, then
    skipped and counted.
    """
    if B < 100:
        raise ValueError(f"need B >= 100 bootstrap resamples, got {B}")
    datasets = list(datasets)
    work = functools.partial(_one_resample, datasets=datasets, pipeline=pipeline, seed=seed)
    draws = _parallel.ordered_map(work, range(B), threads)
    ok = [d for d in draws if d is not None]
    skipped = B - len(ok)
    if not ok:
        raise EstimationError("bootstrap", "every resample failed")
    alpha = 1.0 - level
    intervals, se = {}, {}
    for key in ok[0]:
        vals = np.array([d[key] for d in ok])
        lo, hi = np.quantile(vals, [alpha / 2.0, 1.0 - alpha / 2.0])
        intervals[key] = (float(lo), float(hi))
        se[key] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
    return BootstrapResult(intervals, se, len(ok), skipped, level)


def attach_bootstrap(result: CrossFitResult, boot: BootstrapResult) -> CrossFitResult:
    est = {
        key: dataclasses.replace(
            e,
            bootstrap_se=boot.se[key],
            bootstrap_ci=boot.intervals[key],
            b_effective=boot.b_effective,
            b_skipped=boot.b_skipped,
        )
        for key, e in result.estimates.items()
    }
    return dataclasses.replace(result, estimates=est)


__all__ = [
    "EstimatorConfig",
    "EstimationError",
    "NuisanceFit",
    "fit_nuisance",
    "crossfit_split",
    "crossfit_single",
    "Pipeline",
    "bootstrap_ci",
    "attach_bootstrap",
    "NO_BUDGET",
]
