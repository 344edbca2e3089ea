"""Nuisance regressions: IRLS logistic fits, boosted stumps, constant fits.

Every fitted model exposes ``kind``, ``predict(X)`` and ``to_dict()``; the
dict form round-trips through :func:`regressor_from_dict`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import expit

from . import _kernels
from .data import ObservationTable

KINDS = ("logistic", "stumps", "mean")

_P_LO = np.finfo(np.float64).tiny
_P_HI = np.nextafter(1.0, 0.0)


class SeparationError(RuntimeError):
    """Unpenalized logistic MLE does not exist (single class or separable data)."""


@dataclass(frozen=True)
class LogisticConfig:
    max_iter: int = 100
    tol: float = 1e-8
    ridge: float = 1e-8


@dataclass(frozen=True)
class StumpConfig:
    rounds: int = 100
    rate: float = 0.1
    min_leaf: int = 5


@dataclass(frozen=True)
class NuisanceConfig:
    logistic: LogisticConfig = field(default_factory=LogisticConfig)
    stumps: StumpConfig = field(default_factory=StumpConfig)


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return X[:, None] if X.ndim == 1 else X


# ---------------------------------------------------------------------------
# logistic regression
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LogisticModel:
    intercept: float
    coefficients: np.ndarray
    converged: bool
    iterations: int
    loglik_path: tuple[float, ...] = ()

    kind = "logistic"

    def linear_predictor(self, X) -> np.ndarray:
        X = _as_matrix(X)
        if X.shape[1] != self.coefficients.shape[0]:
            raise ValueError(f"model expects {self.coefficients.shape[0]} covariates, got {X.shape[1]}")
        return self.intercept + X @ self.coefficients

    def predict(self, X) -> np.ndarray:
        return predict_proba(self, X)

    def to_dict(self) -> dict:
        return {
            "kind": "logistic",
            "intercept": float(self.intercept),
            "coefficients": [float(c) for c in self.coefficients],
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
        }


def predict_proba(model: LogisticModel, X) -> np.ndarray:
    """expit of the linear predictor, kept strictly inside (0, 1)."""
    return np.clip(expit(model.linear_predictor(X)), _P_LO, _P_HI)


def _penalized_loglik(Z, y, beta, ridge):
    eta = Z @ beta
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)) - 0.5 * ridge * beta @ beta)


def fit_logistic(X, y, config: LogisticConfig = LogisticConfig()) -> LogisticModel:
    """Ridge-penalized logistic MLE by Newton/IRLS with step halving.

    The penalty ``ridge/2 * ||beta||^2`` covers the intercept too, so any
    positive ridge gives a unique finite optimum. Convergence is declared
    when the max-norm of the per-observation-averaged gradient drops below
    ``tol``. With ``ridge == 0``, single-class or separable data raise
    :class:`SeparationError`.
    """
    X = _as_matrix(X)
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    if y.shape != (n,):
        raise ValueError(f"y has shape {y.shape}, expected ({n},)")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("logistic fit needs a 0/1 response")
    ridge = float(config.ridge)
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    if ridge == 0:
        if n < d + 1:
            raise ValueError(f"need n >= d + 1 rows, got n={n}, d={d}")
        if y.min() == y.max():
            raise SeparationError("response has a single class; the unpenalized MLE does not exist")

    Z = np.hstack([np.ones((n, 1)), X])
    beta = np.zeros(d + 1)
    ll = _penalized_loglik(Z, y, beta, ridge)
    path = [ll]
    converged = False
    it = 0
    for it in range(1, config.max_iter + 1):
        p = expit(Z @ beta)
        grad = Z.T @ (y - p) - ridge * beta
        if np.max(np.abs(grad)) / n <= config.tol:
            converged = True
            it -= 1
            break
        w = p * (1.0 - p)
        H = (Z * w[:, None]).T @ Z + ridge * np.eye(d + 1)
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            if ridge == 0:
                raise SeparationError("information matrix is singular; data may be separable") from None
            raise
        t = 1.0
        for _ in range(40):
            cand = beta + t * step
            ll_new = _penalized_loglik(Z, y, cand, ridge)
            if ll_new >= ll:
                break
            t *= 0.5
        else:
            # no ascent direction left at machine precision
            converged = True
            break
        beta, ll = cand, ll_new
        path.append(ll)

    if ridge == 0:
        eta = Z @ beta
        margin = (2.0 * y - 1.0) * eta
        if np.all(margin >= 0) and np.max(np.abs(eta)) > 15.0:
            raise SeparationError("classes are separable; coefficients diverge")
    coef = beta[1:].copy()
    coef.setflags(write=False)
    return LogisticModel(float(beta[0]), coef, converged, it, tuple(path))


# ---------------------------------------------------------------------------
# boosted stumps
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class StumpEnsemble:
    base: float
    rate: float
    features: np.ndarray
    thresholds: np.ndarray
    left: np.ndarray
    right: np.ndarray
    train_mse: tuple[float, ...] = ()

    kind = "stumps"

    def predict(self, X) -> np.ndarray:
        X = _as_matrix(X)
        out = np.full(X.shape[0], self.base)
        for j, t, lv, rv in zip(self.features, self.thresholds, self.left, self.right):
            if j < 0:
                out += self.rate * lv
            else:
                out += self.rate * np.where(X[:, j] <= t, lv, rv)
        return out

    def to_dict(self) -> dict:
        return {
            "kind": "stumps",
            "base": float(self.base),
            "rate": float(self.rate),
            "stages": [
                [int(j), float(t), float(lv), float(rv)]
                for j, t, lv, rv in zip(self.features, self.thresholds, self.left, self.right)
            ],
        }


def fit_stump_ensemble(X, y, config: StumpConfig = StumpConfig()) -> StumpEnsemble:
    """Least-squares gradient boosting with depth-1 trees.

    A round without an admissible split (fewer than ``2 * min_leaf`` rows,
    or constant covariates) adds a constant stage equal to the mean residual.
    """
    if config.rounds < 1:
        raise ValueError(f"rounds must be >= 1, got {config.rounds}")
    if not 0.0 < config.rate <= 1.0:
        raise ValueError(f"rate must lie in (0, 1], got {config.rate}")
    if config.min_leaf < 1:
        raise ValueError("min_leaf must be >= 1")
    X = np.ascontiguousarray(_as_matrix(X))
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (X.shape[0],) or X.shape[0] == 0:
        raise ValueError("X and y must have the same, non-zero number of rows")
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable"))
    base = float(y.mean())
    fitted = np.full(y.shape[0], base)
    stages = []
    mse = [float(np.mean((y - fitted) ** 2))]
    for _ in range(config.rounds):
        resid = y - fitted
        j, thr, lv, rv, _gain = _kernels.best_split(X, order, resid, config.min_leaf)
        j = int(j)
        if j < 0:
            lv = rv = float(resid.mean())
            fitted = fitted + config.rate * lv
        else:
            fitted = fitted + config.rate * np.where(X[:, j] <= thr, lv, rv)
        stages.append((j, float(thr), float(lv), float(rv)))
        mse.append(float(np.mean((y - fitted) ** 2)))
    cols = list(zip(*stages))
    arrs = [np.asarray(c) for c in cols]
    for a in arrs:
        a.setflags(write=False)
    return StumpEnsemble(base, float(config.rate), arrs[0].astype(np.intp), *arrs[1:], train_mse=tuple(mse))


# ---------------------------------------------------------------------------
# constants, wrappers, dispatch
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MeanRegressor:
    value: float

    kind = "mean"

    def predict(self, X) -> np.ndarray:
        return np.full(_as_matrix(X).shape[0], float(self.value))

    def to_dict(self) -> dict:
        return {"kind": "mean", "value": float(self.value)}


@dataclass(frozen=True)
class FunctionRegressor:
    """Wraps a known closed-form function of X (oracle nuisances in simulations)."""

    func: Callable[[np.ndarray], np.ndarray]
    label: str = "function"

    kind = "function"

    def predict(self, X) -> np.ndarray:
        return np.asarray(self.func(_as_matrix(X)), dtype=np.float64)

    def to_dict(self) -> dict:
        return {"kind": "function", "label": self.label}


def fit_regressor(X, y, kind: str, config: NuisanceConfig = NuisanceConfig()):
    if kind == "logistic":
        return fit_logistic(X, y, config.logistic)
    if kind == "stumps":
        return fit_stump_ensemble(X, y, config.stumps)
    if kind == "mean":
        y = np.asarray(y, dtype=np.float64)
        if y.size == 0:
            raise ValueError("cannot fit a mean to zero rows")
        return MeanRegressor(float(y.mean()))
    raise ValueError(f"unknown regressor kind {kind!r}; expected one of {KINDS}")


def fit_arm_regression(
    table: ObservationTable,
    target: str,
    arm: int,
    kind: str,
    config: NuisanceConfig = NuisanceConfig(),
):
    """Regress ``target`` on covariates among rows with treatment == ``arm``."""
    y = table.column(target)
    rows = table.treatment == arm
    if not rows.any():
        raise ValueError(f"no rows with treatment == {arm} to fit the {target} regression")
    return fit_regressor(table.covariates[rows], y[rows], kind, config)


def fit_propensity(table: ObservationTable, kind: str, config: NuisanceConfig = NuisanceConfig()):
    return fit_regressor(table.covariates, table.treatment, kind, config)


def clip_propensity(e, epsilon: float = 0.01) -> np.ndarray:
    if not 0.0 < epsilon < 0.5:
        raise ValueError(f"epsilon must lie in (0, 0.5), got {epsilon}")
    return np.clip(np.asarray(e, dtype=np.float64), epsilon, 1.0 - epsilon)


def regressor_from_dict(doc: dict):
    kind = doc.get("kind")
    if kind == "logistic":
        coef = np.asarray(doc["coefficients"], dtype=np.float64)
        coef.setflags(write=False)
        return LogisticModel(float(doc["intercept"]), coef, bool(doc["converged"]), int(doc["iterations"]))
    if kind == "stumps":
        stages = doc["stages"]
        cols = [np.asarray(c) for c in zip(*stages)] if stages else [np.empty(0)] * 4
        return StumpEnsemble(
            float(doc["base"]),
            float(doc["rate"]),
            cols[0].astype(np.intp),
            cols[1].astype(np.float64),
            cols[2].astype(np.float64),
            cols[3].astype(np.float64),
        )
    if kind == "mean":
        return MeanRegressor(float(doc["value"]))
    raise ValueError(f"cannot deserialize regressor kind {kind!r}")


def dumps(model) -> str:
    return json.dumps(model.to_dict(), sort_keys=True)


def loads(text: str):
    return regressor_from_dict(json.loads(text))
