"""Ground-truth metric values by brute force.

Continuous designs draw X, evaluate the closed-form CATEs, take budget
thresholds from the empirical CDF of the drawn CATEs, and average the
defining integrands. Designs whose CATEs take finitely many values are
enumerated exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .. import seeding
from ..policy import NO_BUDGET, budget_assignments, empirical_quantile
from .dgp import SIM61_SD, DgpSpec, gen_appendix_s1, true_cates

MIN_DRAWS = 10**6


@dataclass(frozen=True)
class OracleTruth:
    lam: float | None
    R: float
    G: float
    V: float
    mc_se: dict
    draws: int
    threshold_y: float
    threshold_s: float
    ate: float
    analytic: dict = field(default_factory=dict)
    warnings: tuple = ()

    def value(self, metric: str) -> float:
        return {"regret": self.R, "gain": self.G, "efficiency": self.V}[metric]

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "R": self.R,
            "G": self.G,
            "V": self.V,
            "mc_se": dict(self.mc_se),
            "draws": self.draws,
            "threshold_y": _num(self.threshold_y),
            "threshold_s": _num(self.threshold_s),
            "ate": self.ate,
            "analytic": {k: (str(v) if isinstance(v, Fraction) else v) for k, v in self.analytic.items()},
            "warnings": list(self.warnings),
        }


def _num(v):
    return None if v == NO_BUDGET else v


def _draw_x(spec: DgpSpec, draws: int, seed: int) -> np.ndarray:
    rng = seeding.generator(seed, seeding.ORACLE)
    if spec.kind == "sim61":
        return rng.normal(0.0, SIM61_SD, size=(draws, 2))
    return rng.random(draws)[:, None]


def _integrands(tau_y, tau_s, pi_y, pi_s, lam_eff):
    return {
        "regret": tau_y * (pi_y - pi_s),
        "gain": tau_y * pi_s,
        "efficiency": tau_y * (pi_s - lam_eff),
    }


def oracle_table(spec: DgpSpec, lambdas, draws: int = 10**7, seed: int = 0) -> dict:
    """Oracle values for several budgets from one shared set of draws.

    ``None`` in ``lambdas`` is the unconstrained sign rule (identical to 1).
    """
    lambdas = list(lambdas)
    if spec.kind == "appendixS1":
        return {lam: _appendix_truth(lam) for lam in lambdas}
    if not spec.continuous:
        return {lam: _constant_cate_truth(spec, lam) for lam in lambdas}

    warnings = ()
    if draws < MIN_DRAWS:
        warnings = (f"only {draws} oracle draws (< {MIN_DRAWS}); Monte Carlo error dominates",)
    X = _draw_x(spec, draws, seed)
    tau_y, tau_s = true_cates(spec, X)
    del X
    out = {}
    for lam in lambdas:
        if lam is None or lam == 1.0:
            ty = ts = NO_BUDGET
        else:
            ty, ts = empirical_quantile(tau_y, lam), empirical_quantile(tau_s, lam)
        pi_y = budget_assignments(tau_y, ty)
        pi_s = budget_assignments(tau_s, ts)
        lam_eff = 1.0 if lam is None else float(lam)
        vals = _integrands(tau_y, tau_s, pi_y, pi_s, lam_eff)
        means = {k: float(v.mean()) for k, v in vals.items()}
        mc_se = {k: float(v.std(ddof=1) / np.sqrt(draws)) for k, v in vals.items()}
        analytic = _example3_analytic(spec, lam_eff) if spec.kind == "example3" else {}
        out[lam] = OracleTruth(
            lam, means["regret"], means["gain"], means["efficiency"], mc_se, draws, ty, ts,
            float(tau_y.mean()), analytic, warnings,
        )
    return out


def oracle_truth(spec: DgpSpec, lam: float | None, draws: int = 10**7, seed: int = 0) -> OracleTruth:
    return oracle_table(spec, [lam], draws, seed)[lam]


def sign_rule_regret(spec: DgpSpec, draws: int = 10**7, seed: int = 1) -> tuple[float, float]:
    """E[tau_Y (1{tau_Y>0} - 1{tau_S>0})] computed directly, as a cross-check of the budget path."""
    X = _draw_x(spec, draws, seed)
    tau_y, tau_s = true_cates(spec, X)
    v = tau_y * ((tau_y > 0).astype(np.float64) - (tau_s > 0).astype(np.float64))
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(draws))


def _example3_analytic(spec: DgpSpec, lam: float) -> dict:
    """Closed form for tau_S = a + bX, tau_Y = a - bX with X ~ U(0,1).

    pi_S treats X > 1 - lam (tau_S > 0 everywhere); pi_Y treats X < lam
    restricted to tau_Y > 0, i.e. X < a/b.
    """
    a, b = spec.params["alpha"], spec.params["beta"]

    def integral(lo, hi):  # integral of a - b x over [lo, hi]
        lo, hi = max(lo, 0.0), min(hi, 1.0)
        if hi <= lo:
            return 0.0
        return a * (hi - lo) - 0.5 * b * (hi * hi - lo * lo)

    y_part = integral(0.0, min(lam, a / b))
    s_part = integral(1.0 - lam, 1.0)
    ate = a - 0.5 * b
    return {"R": y_part - s_part, "G": s_part, "V": s_part - lam * ate}


def _constant_cate_truth(spec: DgpSpec, lam) -> OracleTruth:
    """example1 / example2: both CATEs are constant, so everything is exact."""
    p = spec.params
    if spec.kind == "example1":
        tau_y, tau_s = -1.0, 1.0
    else:
        tau_y, tau_s = p["alpha"], -p["alpha"]
    lam_eff = 1.0 if lam is None else float(lam)
    # a degenerate CATE sits exactly at its own quantile, so only lam == 1 treats anyone
    ty = NO_BUDGET if lam_eff == 1.0 else tau_y
    ts = NO_BUDGET if lam_eff == 1.0 else tau_s
    pi_y = float(tau_y > ty and tau_y > 0)
    pi_s = float(tau_s > ts and tau_s > 0)
    zero = {"regret": 0.0, "gain": 0.0, "efficiency": 0.0}
    return OracleTruth(
        lam, tau_y * (pi_y - pi_s), tau_y * pi_s, tau_y * (pi_s - lam_eff), zero, 0, ty, ts, tau_y,
    )


def _appendix_truth(lam) -> OracleTruth:
    world = gen_appendix_s1()
    tau_y, tau_s = world.tau_y(), world.tau_s()
    probs = world.probs
    lam_f = Fraction(1) if lam is None else Fraction(str(lam))

    def rule(tau):
        if lam_f == 1:
            return tuple(int(t > 0) for t in tau), NO_BUDGET
        thr = _fraction_quantile(tau, probs, lam_f)
        return tuple(int(t > thr and t > 0) for t in tau), thr

    pi_y, ty = rule(tau_y)
    pi_s, ts = rule(tau_s)
    R = sum((p * t * (a - b) for p, t, a, b in zip(probs, tau_y, pi_y, pi_s)), Fraction(0))
    G = sum((p * t * b for p, t, b in zip(probs, tau_y, pi_s)), Fraction(0))
    ate = sum((p * t for p, t in zip(probs, tau_y)), Fraction(0))
    V = G - lam_f * ate
    analytic = {
        "R": R,
        "G": G,
        "V": V,
        "outcome_rule_value": world.value(world.outcome_rule()),
        "surrogate_rule_value": world.value(world.surrogate_rule()),
        "random_rule_value": world.random_value(lam_f),
    }
    zero = {"regret": 0.0, "gain": 0.0, "efficiency": 0.0}
    return OracleTruth(
        lam, float(R), float(G), float(V), zero, 0,
        float(ty), float(ts), float(ate), analytic,
    )


def _fraction_quantile(values, probs, lam: Fraction):
    order = sorted(range(len(values)), key=lambda i: values[i])
    cdf = Fraction(0)
    for i in order:
        cdf += probs[i]
        if cdf >= 1 - lam:
            return values[i]
    return values[order[-1]]


__all__ = ["OracleTruth", "oracle_truth", "oracle_table", "sign_rule_regret"]
