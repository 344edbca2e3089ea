"""CATE vectors, empirical quantile thresholds and plug-in budget rules."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

NO_BUDGET = -math.inf


@dataclass(frozen=True, eq=False)
class CateVector:
    values: np.ndarray
    endpoint: str = "outcome"

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True)
        if not np.all(np.isfinite(v)):
            raise ValueError("CATE values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class BudgetPolicy:
    lam: float
    threshold: float
    assignments: np.ndarray

    @property
    def treated_fraction(self) -> float:
        return float(self.assignments.mean())


def _values(tau) -> np.ndarray:
    return tau.values if isinstance(tau, CateVector) else np.asarray(tau, dtype=np.float64)


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"budget lambda must lie in (0, 1], got {lam}")
    return lam


def cate(mu1, mu0, endpoint: str = "outcome") -> CateVector:
    mu1 = np.asarray(mu1, dtype=np.float64)
    mu0 = np.asarray(mu0, dtype=np.float64)
    if mu1.shape != mu0.shape:
        raise ValueError(f"length mismatch: {mu1.shape} vs {mu0.shape}")
    return CateVector(mu1 - mu0, endpoint)


def empirical_quantile(tau, lam: float) -> float:
    """Smallest observed t with ``mean(tau <= t) >= 1 - lam``.

    Returns the ``NO_BUDGET`` sentinel (-inf) when ``lam == 1``.
    """
    lam = _check_lambda(lam)
    v = _values(tau)
    if v.size == 0:
        raise ValueError("cannot take a quantile of an empty vector")
    if lam == 1.0:
        return NO_BUDGET
    s = np.sort(v)
    n = s.shape[0]
    ok = np.arange(1, n + 1) / n >= 1.0 - lam
    return float(s[int(np.argmax(ok))])


def weighted_quantile(values, weights, lam: float) -> float:
    """Population version of :func:`empirical_quantile` for a discrete law."""
    lam = _check_lambda(lam)
    if lam == 1.0:
        return NO_BUDGET
    v = np.asarray(values, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    order = np.argsort(v, kind="stable")
    v, w = v[order], w[order]
    cdf = np.cumsum(w) / w.sum()
    ok = cdf >= 1.0 - lam - 1e-12
    return float(v[int(np.argmax(ok))])


def plugin_policy(tau) -> np.ndarray:
    """Unconstrained sign rule 1{tau > 0}."""
    return (_values(tau) > 0.0).astype(np.float64)


def budget_assignments(tau, threshold: float) -> np.ndarray:
    v = _values(tau)
    return ((v > threshold) & (v > 0.0)).astype(np.float64)


def budget_policy(tau, lam: float, threshold: float | None = None) -> BudgetPolicy:
    """1{tau > threshold} * 1{tau > 0}; ties at the threshold or at zero are untreated.

    ``threshold`` defaults to the empirical quantile of ``tau`` itself.
    """
    lam = _check_lambda(lam)
    if threshold is None:
        threshold = empirical_quantile(tau, lam)
    assign = budget_assignments(tau, threshold)
    assign.setflags(write=False)
    return BudgetPolicy(lam, float(threshold), assign)


def policy_agreement(p1, p2) -> float:
    """Share of rows treated by either rule on which the two rules agree.

    Returns 1.0 when neither rule treats anybody.
    """
    a = np.asarray(p1.assignments if isinstance(p1, BudgetPolicy) else p1) > 0
    b = np.asarray(p2.assignments if isinstance(p2, BudgetPolicy) else p2) > 0
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    either = a | b
    if not either.any():
        return 1.0
    return float((a & b).sum() / either.sum())


def write_policy_csv(path: str | Path, tau, policy) -> None:
    v = _values(tau)
    assign = policy.assignments if isinstance(policy, BudgetPolicy) else np.asarray(policy)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["row", "tau", "assignment"])
        for i, (t, p) in enumerate(zip(v, assign)):
            w.writerow([i, repr(float(t)), int(p)])
