"""Synthetic worlds: the logistic simulation design and the paradox examples.

``sim61``
    X ~ N(0, 0.2^2 I_2), P(A=1|X) = expit(0.1 X1 + 0.1 X2), binary potential
    outcomes and surrogates with expit means (see ``SIM61_COEFS``).
``example1(alpha)``
    X ~ Bern(0.5), A ~ Bern(0.5); S = A + alpha X + e_S, Y = -A + alpha X + e_Y.
``example2(alpha, beta)``
    X ~ U(0,1); S = beta X + (1-A) alpha + e_S, Y = beta X - (1-A) alpha + e_Y.
``example3(alpha, beta)``
    X ~ U(0,1); S = (1-A)(-alpha - beta X) + e_S, Y = (1-A)(-alpha + beta X) + e_Y,
    so tau_S = alpha + beta X and tau_Y = alpha - beta X.
``appendixS1``
    X uniform on {-1, 0, 1} with a deterministic potential-outcome table.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.special import expit

from .. import seeding
from ..data import ObservationTable
from ..nuisance import FunctionRegressor

KINDS = ("sim61", "example1", "example2", "example3", "appendixS1")

SIM61_PROPENSITY = (0.1, 0.1)
SIM61_COEFS = {
    ("outcome", 1): (0.3, 0.1),
    ("outcome", 0): (0.5, 0.3),
    ("surrogate", 1): (0.1, 0.1),
    ("surrogate", 0): (0.5, 0.2),
}
SIM61_SD = 0.2

_DEFAULT_PARAMS = {
    "sim61": {},
    "example1": {"alpha": 3.0},
    "example2": {"alpha": 1.0, "beta": 6.0},
    "example3": {"alpha": 2.0, "beta": 1.0},
    "appendixS1": {},
}


@dataclass(frozen=True)
class DgpSpec:
    kind: str = "sim61"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown DGP kind {self.kind!r}; expected one of {KINDS}")
        merged = dict(_DEFAULT_PARAMS[self.kind])
        unknown = set(self.params) - set(merged)
        if unknown:
            raise ValueError(f"{self.kind} has no parameters {sorted(unknown)}")
        merged.update({k: float(v) for k, v in self.params.items()})
        object.__setattr__(self, "params", merged)
        if self.kind == "example3" and not (merged["alpha"] > 0 and merged["beta"] > 0):
            raise ValueError("example3 needs alpha > 0 and beta > 0")
        for k, v in merged.items():
            if not np.isfinite(v):
                raise ValueError(f"parameter {k} must be finite")

    @property
    def continuous(self) -> bool:
        """True when oracle values need Monte Carlo draws."""
        return self.kind in ("sim61", "example3")


@dataclass(frozen=True, eq=False)
class PotentialTable:
    y0: np.ndarray
    y1: np.ndarray
    s0: np.ndarray
    s1: np.ndarray


# ---------------------------------------------------------------------------
# closed-form pieces (module-level so they pickle into worker processes)
# ---------------------------------------------------------------------------


def _expit_linear(X, coefs):
    return expit(X @ np.asarray(coefs, dtype=np.float64))


def _linear(X, intercept, slope):
    return intercept + slope * X[:, 0]


def _constant(X, value):
    return np.full(X.shape[0], float(value))


def _mean_functions(spec: DgpSpec):
    """(mu_Y0, mu_Y1, mu_S0, mu_S1, e) as picklable callables of X."""
    p = spec.params
    if spec.kind == "sim61":
        f = {k: functools.partial(_expit_linear, coefs=c) for k, c in SIM61_COEFS.items()}
        return (
            f[("outcome", 0)], f[("outcome", 1)], f[("surrogate", 0)], f[("surrogate", 1)],
            functools.partial(_expit_linear, coefs=SIM61_PROPENSITY),
        )
    half = functools.partial(_constant, value=0.5)
    if spec.kind == "example1":
        a = p["alpha"]
        return (
            functools.partial(_linear, intercept=0.0, slope=a),
            functools.partial(_linear, intercept=-1.0, slope=a),
            functools.partial(_linear, intercept=0.0, slope=a),
            functools.partial(_linear, intercept=1.0, slope=a),
            half,
        )
    if spec.kind == "example2":
        a, b = p["alpha"], p["beta"]
        return (
            functools.partial(_linear, intercept=-a, slope=b),
            functools.partial(_linear, intercept=0.0, slope=b),
            functools.partial(_linear, intercept=a, slope=b),
            functools.partial(_linear, intercept=0.0, slope=b),
            half,
        )
    if spec.kind == "example3":
        a, b = p["alpha"], p["beta"]
        zero = functools.partial(_constant, value=0.0)
        return (
            functools.partial(_linear, intercept=-a, slope=b),
            zero,
            functools.partial(_linear, intercept=-a, slope=-b),
            zero,
            half,
        )
    raise ValueError(f"{spec.kind} has no regression functions over a continuous X")


def true_regressors(spec: DgpSpec) -> dict:
    """Oracle nuisances in the ``overrides`` format of ``fit_nuisance``."""
    names = ("outcome0", "outcome1", "surrogate0", "surrogate1", "propensity")
    return {n: FunctionRegressor(f, f"{spec.kind}:{n}") for n, f in zip(names, _mean_functions(spec))}


def true_cates(spec: DgpSpec, X) -> tuple[np.ndarray, np.ndarray]:
    """(tau_Y(X), tau_S(X)) in closed form."""
    X = np.asarray(X, dtype=np.float64)
    X = X[:, None] if X.ndim == 1 else X
    my0, my1, ms0, ms1, _ = _mean_functions(spec)
    return my1(X) - my0(X), ms1(X) - ms0(X)


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------


def gen_sim61(n: int, seed: int = 0) -> tuple[ObservationTable, PotentialTable]:
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = seeding.generator(seed, seeding.DATA)
    X = rng.normal(0.0, SIM61_SD, size=(n, 2))
    a = (rng.random(n) < _expit_linear(X, SIM61_PROPENSITY)).astype(np.float64)
    pot = {}
    for key in (("outcome", 1), ("outcome", 0), ("surrogate", 1), ("surrogate", 0)):
        pot[key] = (rng.random(n) < _expit_linear(X, SIM61_COEFS[key])).astype(np.float64)
    p = PotentialTable(pot[("outcome", 0)], pot[("outcome", 1)], pot[("surrogate", 0)], pot[("surrogate", 1)])
    return _observe(X, a, p), p


def _observe(X, a, p: PotentialTable) -> ObservationTable:
    y = a * p.y1 + (1.0 - a) * p.y0
    s = a * p.s1 + (1.0 - a) * p.s0
    return ObservationTable(X, a, y, s)


def gen_example(kind: str, params: dict | None = None, n: int = 1000, seed: int = 0):
    """Draw ``n`` rows from one of the paradox examples; returns (table, potentials)."""
    spec = DgpSpec(kind, params or {})
    if spec.kind == "sim61":
        return gen_sim61(n, seed)
    if spec.kind == "appendixS1":
        return gen_appendix_s1().sample(n, seed)
    if n < 1:
        raise ValueError("n must be >= 1")
    p = spec.params
    rng = seeding.generator(seed, seeding.DATA)
    if kind == "example1":
        x = (rng.random(n) < 0.5).astype(np.float64)
    else:
        x = rng.random(n)
    a = (rng.random(n) < 0.5).astype(np.float64)
    eps_s = rng.standard_normal(n)
    eps_y = rng.standard_normal(n)
    if kind == "example1":
        s0, s1 = p["alpha"] * x + eps_s, 1.0 + p["alpha"] * x + eps_s
        y0, y1 = p["alpha"] * x + eps_y, -1.0 + p["alpha"] * x + eps_y
    elif kind == "example2":
        s1 = p["beta"] * x + eps_s
        s0 = p["alpha"] + s1
        y1 = p["beta"] * x + eps_y
        y0 = -p["alpha"] + y1
    else:  # example3
        s1, y1 = eps_s, eps_y
        s0 = -p["alpha"] - p["beta"] * x + eps_s
        y0 = -p["alpha"] + p["beta"] * x + eps_y
    pot = PotentialTable(y0, y1, s0, s1)
    return _observe(x[:, None], a, pot), pot


def example1_correlation(alpha: float) -> float:
    return 0.25 * (alpha**2 - 1.0) / (1.25 + 0.25 * alpha**2)


def example2_correlation(beta: float) -> float:
    return beta**2 / (beta**2 + 12.0)


# ---------------------------------------------------------------------------
# the discrete optimal-transformation counterexample
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscreteWorld:
    """Finite covariate support with exact probabilities and potential outcomes."""

    support: tuple
    probs: tuple  # Fractions
    s0: tuple
    s1: tuple
    y0: tuple
    y1: tuple
    transform: object = None  # g applied to the surrogate before ranking

    def _g(self, v):
        return v if self.transform is None else self.transform(v)

    def tau_y(self):
        return tuple(Fraction(b) - Fraction(a) for a, b in zip(self.y0, self.y1))

    def tau_s(self):
        return tuple(Fraction(self._g(b)) - Fraction(self._g(a)) for a, b in zip(self.s0, self.s1))

    def value(self, policy) -> Fraction:
        """E[Y(pi(X))] for a deterministic rule given as a 0/1 tuple over the support."""
        return sum(
            (p * (Fraction(y1) if t else Fraction(y0)) for p, t, y0, y1 in zip(self.probs, policy, self.y0, self.y1)),
            Fraction(0),
        )

    def random_value(self, lam) -> Fraction:
        lam = Fraction(str(lam))
        return sum(
            (p * (lam * Fraction(y1) + (1 - lam) * Fraction(y0)) for p, y0, y1 in zip(self.probs, self.y0, self.y1)),
            Fraction(0),
        )

    def outcome_rule(self):
        return tuple(int(t > 0) for t in self.tau_y())

    def surrogate_rule(self):
        return tuple(int(t > 0) for t in self.tau_s())

    def sample(self, n: int, seed: int = 0):
        rng = seeding.generator(seed, seeding.DATA)
        idx = rng.choice(len(self.support), size=n, p=[float(p) for p in self.probs])
        x = np.asarray(self.support, dtype=np.float64)[idx]
        a = (rng.random(n) < 0.5).astype(np.float64)
        pot = PotentialTable(*(np.asarray(col, dtype=np.float64)[idx] for col in (self.y0, self.y1, self.s0, self.s1)))
        return _observe(x[:, None], a, pot), pot


def _identity(v):
    return v


def gen_appendix_s1() -> DiscreteWorld:
    third = Fraction(1, 3)
    return DiscreteWorld(
        support=(-1, 0, 1),
        probs=(third, third, third),
        s0=(2, 3, 2),
        s1=(3, 2, 2),
        y0=(4, 3, 0),
        y1=(3, 4, 0),
        transform=_identity,
    )
