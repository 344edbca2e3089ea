"""Doubly robust scores for surrogate regret, gain and efficiency.

All three estimators average a per-row score over an evaluation sample that
was not used to fit the nuisances in the :class:`NuisanceBundle`:

    regret      [pi_Y - pi_S] * r + tau * [pi_Y - pi_S]
    gain        pi_S * r + tau * pi_S
    efficiency  [pi_S - lam] * r + tau * [pi_S - lam]

with ``r = {A/e - (1-A)/(1-e)} * (Y - mu_A)`` and ``tau = mu_1 - mu_0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from . import _kernels
from .data import ObservationTable
from .policy import NO_BUDGET

METRICS = ("regret", "gain", "efficiency")


@dataclass(frozen=True, eq=False)
class NuisanceBundle:
    """Row-aligned nuisance predictions for one evaluation sample.

    ``tau_y``/``tau_s`` are the CATEs that drove the policies; the plug-in
    term of every score uses ``mu1 - mu0``. They coincide unless a separate
    policy learner was configured.
    """

    mu0: np.ndarray
    mu1: np.ndarray
    e: np.ndarray
    tau_y: np.ndarray
    tau_s: np.ndarray
    pi_y: np.ndarray
    pi_s: np.ndarray
    lam: float | None
    threshold_y: float = NO_BUDGET
    threshold_s: float = NO_BUDGET

    @property
    def budget(self) -> float:
        """Budget used in the efficiency baseline; the unconstrained rule counts as 1."""
        return 1.0 if self.lam is None else float(self.lam)

    def take(self, idx) -> "NuisanceBundle":
        idx = np.asarray(idx, dtype=np.intp)
        return NuisanceBundle(
            self.mu0[idx], self.mu1[idx], self.e[idx], self.tau_y[idx], self.tau_s[idx],
            self.pi_y[idx], self.pi_s[idx], self.lam, self.threshold_y, self.threshold_s,
        )

    @staticmethod
    def concat(parts: list["NuisanceBundle"], order: np.ndarray) -> "NuisanceBundle":
        """Stack fold bundles and put rows back in original order (``order`` = stacked row ids)."""
        inv = np.empty_like(order)
        inv[order] = np.arange(order.shape[0])
        cols = [np.concatenate([getattr(p, f) for p in parts])[inv]
                for f in ("mu0", "mu1", "e", "tau_y", "tau_s", "pi_y", "pi_s")]
        if len(parts) == 1:
            return NuisanceBundle(*cols, parts[0].lam, parts[0].threshold_y, parts[0].threshold_s)
        return NuisanceBundle(*cols, parts[0].lam, np.nan, np.nan)


@dataclass(frozen=True)
class MetricEstimate:
    metric: str
    lam: float | None
    point: float
    analytic_se: float
    ci: tuple[float, float]
    level: float
    n_main: int
    bootstrap_se: float | None = None
    bootstrap_ci: tuple[float, float] | None = None
    b_effective: int | None = None
    b_skipped: int | None = None

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "lambda": self.lam,
            "point": self.point,
            "analytic_se": self.analytic_se,
            "ci": list(self.ci),
            "level": self.level,
            "n_main": self.n_main,
            "bootstrap_se": self.bootstrap_se,
            "bootstrap_ci": None if self.bootstrap_ci is None else list(self.bootstrap_ci),
            "B_effective": self.b_effective,
            "B_skipped": self.b_skipped,
        }


def ipw_residual(a, y, e, mu0, mu1):
    a = np.asarray(a, dtype=np.float64)
    e = np.asarray(e, dtype=np.float64)
    return (a / e - (1.0 - a) / (1.0 - e)) * (np.asarray(y) - (a * np.asarray(mu1) + (1.0 - a) * np.asarray(mu0)))


def influence_values(table: ObservationTable, bundle: NuisanceBundle) -> dict[str, np.ndarray]:
    """All per-row scores plus the DR average-treatment-effect score (key ``"ate"``)."""
    if table.outcome is None:
        raise ValueError("evaluation sample needs an outcome column")
    if bundle.mu0.shape[0] != table.n:
        raise ValueError(f"bundle has {bundle.mu0.shape[0]} rows, table has {table.n}")
    phi, omega, psi, ate = _kernels.influence_terms(
        table.treatment, table.outcome, bundle.e, bundle.mu0, bundle.mu1,
        bundle.pi_y, bundle.pi_s, bundle.budget,
    )
    return {"regret": phi, "gain": omega, "efficiency": psi, "ate": ate}


def phi_regret(table: ObservationTable, bundle: NuisanceBundle) -> np.ndarray:
    return influence_values(table, bundle)["regret"]


def omega_gain(table: ObservationTable, bundle: NuisanceBundle) -> np.ndarray:
    return influence_values(table, bundle)["gain"]


def psi_efficiency(table: ObservationTable, bundle: NuisanceBundle) -> np.ndarray:
    return influence_values(table, bundle)["efficiency"]


def summarize(values, metric: str, lam: float | None, level: float = 0.95) -> MetricEstimate:
    """Sample mean with a normal CI from the sample SD of the scores."""
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    v = np.asarray(values, dtype=np.float64)
    n = v.shape[0]
    if n == 0:
        raise ValueError("empty evaluation sample")
    point = float(v.mean())
    if n > 1 and not np.all(v == v[0]):
        se = float(v.std(ddof=1) / np.sqrt(n))
    else:
        se = 0.0
    z = float(norm.ppf(0.5 + level / 2.0))
    return MetricEstimate(metric, lam, point, se, (point - z * se, point + z * se), level, n)


def estimate_metric(main: ObservationTable, bundle: NuisanceBundle, metric: str, level: float = 0.95) -> MetricEstimate:
    return summarize(influence_values(main, bundle)[metric], metric, bundle.lam, level)


def lemma2_bias(bundle_hat: NuisanceBundle, bundle_true: NuisanceBundle, metric: str = "regret"):
    """Conditional bias of a score under perturbed nuisances, computed two ways.

    Needs binary Y with ``P(Y=1 | X, A=a) = bundle_true.mu{a}`` and the true
    propensity in ``bundle_true.e``. Returns ``(exact, closed_form)`` arrays:
    the exact expectation over (A, Y) given X, and the product-of-errors
    expression.
    """
    m = bundle_true.mu0.shape[0]
    ones = np.ones(m)
    exact = np.zeros(m)
    for a in (0.0, 1.0):
        pa = bundle_true.e if a == 1.0 else 1.0 - bundle_true.e
        mu_a = bundle_true.mu1 if a == 1.0 else bundle_true.mu0
        for y in (0.0, 1.0):
            py = mu_a if y == 1.0 else 1.0 - mu_a
            t = ObservationTable(np.zeros((m, 1)), a * ones, y * ones)
            diff = influence_values(t, bundle_hat)[metric] - influence_values(t, bundle_true)[metric]
            exact += pa * py * diff

    e_hat, e = bundle_hat.e, bundle_true.e
    tau = bundle_true.mu1 - bundle_true.mu0
    cross = (e_hat - e) / e_hat * (bundle_hat.mu1 - bundle_true.mu1) + (e_hat - e) / (1.0 - e_hat) * (
        bundle_hat.mu0 - bundle_true.mu0
    )
    ds = bundle_hat.pi_s - bundle_true.pi_s
    if metric == "regret":
        closed = tau * ((bundle_hat.pi_y - bundle_true.pi_y) - ds) + (bundle_hat.pi_y - bundle_hat.pi_s) * cross
    elif metric == "gain":
        closed = tau * ds + bundle_hat.pi_s * cross
    elif metric == "efficiency":
        closed = tau * ds + (bundle_hat.pi_s - bundle_hat.budget) * cross
    else:
        raise ValueError(f"unknown metric {metric!r}")
    return exact, closed
