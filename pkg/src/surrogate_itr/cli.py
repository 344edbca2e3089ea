"""``surrogate-itr`` command line: estimate, simulate, oracle, paradox.

Settings resolve as command-line flag > ``SURROGATE_ITR_<KEY>`` environment
variable > ``--config`` JSON file > built-in default. Unknown keys in the
config file are rejected, and every value is validated before any work starts.

Exit codes: 0 success, 2 invalid configuration, 3 input schema error,
4 estimation failure, 5 a file could not be read or written.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, seeding
from .crossfit import EstimationError, EstimatorConfig, Pipeline, attach_bootstrap, bootstrap_ci
from .data import SchemaError, read_csv
from .estimators import METRICS
from .nuisance import KINDS as NUISANCE_KINDS
from .policy import budget_assignments, empirical_quantile, plugin_policy, policy_agreement
from .reporting import atomic_write, config_hash, csv_text, dumps_json
from .simulation import (
    DgpSpec,
    ReplicationConfig,
    example1_correlation,
    example2_correlation,
    gen_appendix_s1,
    gen_example,
    oracle_table,
    run_replications,
    true_cates,
)
from .simulation.dgp import KINDS as DGP_KINDS

ENV_PREFIX = "SURROGATE_ITR_"
EXIT_OK, EXIT_CONFIG, EXIT_SCHEMA, EXIT_ESTIMATION, EXIT_OUTPUT = 0, 2, 3, 4, 5


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# value parsers (accept strings from flags/env and native JSON values)
# ---------------------------------------------------------------------------


def _split(v):
    if isinstance(v, str):
        return [t.strip() for t in v.split(",") if t.strip()]
    if isinstance(v, (list, tuple)):
        return list(v)
    return [v]


def parse_lambdas(v):
    out = []
    for t in _split(v):
        if t is None or (isinstance(t, str) and t.lower() in ("none", "unconstrained")):
            out.append(None)
            continue
        try:
            lam = float(t)
        except (TypeError, ValueError):
            raise ConfigError(f"lambda: cannot parse {t!r}") from None
        if not 0.0 < lam <= 1.0:
            raise ConfigError(f"lambda must lie in (0, 1], got {lam}")
        out.append(lam)
    if not out:
        raise ConfigError("lambda: empty list")
    if len(set(out)) != len(out):
        raise ConfigError("lambda: duplicate values")
    return out


def parse_metrics(v):
    out = [str(t) for t in _split(v)]
    bad = [m for m in out if m not in METRICS]
    if bad or not out:
        raise ConfigError(f"metric must be a non-empty subset of {METRICS}, got {out}")
    return out


def parse_params(v):
    if isinstance(v, dict):
        items = v.items()
    else:
        items = []
        for t in _split(v):
            if "=" not in str(t):
                raise ConfigError(f"params: expected key=value, got {t!r}")
            k, val = str(t).split("=", 1)
            items.append((k.strip(), val))
    try:
        return {k: float(val) for k, val in items}
    except (TypeError, ValueError):
        raise ConfigError(f"params: non-numeric value in {v!r}") from None


def _int(lo=None):
    def parse(v):
        # exact for big seeds; "1e6" style strings go through float and must be integral
        if isinstance(v, bool):
            raise ConfigError(f"expected an integer, got {v!r}")
        try:
            i = int(v) if isinstance(v, int) or str(v).strip().lstrip("+-").isdigit() else None
            if i is None:
                f = float(v)
                i = int(f)
                if i != f:
                    raise ValueError
        except (TypeError, ValueError, OverflowError):
            raise ConfigError(f"expected an integer, got {v!r}") from None
        if lo is not None and i < lo:
            raise ConfigError(f"must be >= {lo}, got {i}")
        return i

    return parse


def _float(lo, hi, lo_open=True, hi_open=True):
    def parse(v):
        try:
            f = float(v)
        except (TypeError, ValueError):
            raise ConfigError(f"expected a number, got {v!r}") from None
        ok_lo = f > lo if lo_open else f >= lo
        ok_hi = f < hi if hi_open else f <= hi
        if not (ok_lo and ok_hi):
            raise ConfigError(f"{f} outside allowed range")
        return f

    return parse


def _choice(options):
    def parse(v):
        if v not in options:
            raise ConfigError(f"expected one of {tuple(options)}, got {v!r}")
        return v

    return parse


def _bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {v!r}")


def _opt(parser):
    return lambda v: None if v is None or v == "" else parser(v)


def _str(v):
    return str(v)


COMMON = {
    "seed": (_opt(_int(0)), None),
    "out": (_opt(_str), None),
    "format": (_opt(_choice(("csv", "json"))), None),
    "threads": (_int(1), 1),
    "level": (_float(0.0, 1.0), 0.95),
}
SCHEMAS = {
    "estimate": {
        "input": (_opt(_str), None),
        "input_surrogate": (_opt(_str), None),
        "lambda": (parse_lambdas, [0.1, 0.2, 0.3, 0.4]),
        "metric": (parse_metrics, list(METRICS)),
        "nuisance": (_choice(NUISANCE_KINDS), "logistic"),
        "propensity": (_choice(NUISANCE_KINDS), "logistic"),
        "folds": (_opt(_int(1)), None),
        "fraction": (_float(0.0, 1.0), 0.5),
        "clip": (_float(0.0, 0.5), 0.01),
        "subsplit": (_bool, False),
        "bootstrap": (_int(0), 0),
    },
    "simulate": {
        "kind": (_choice(DGP_KINDS), "sim61"),
        "params": (parse_params, {}),
        "n": (_int(2), 1000),
        "reps": (_int(2), 1000),
        "lambda": (parse_lambdas, [0.1, 0.2, 0.3, 0.4]),
        "metric": (parse_metrics, list(METRICS)),
        "nuisance": (_choice(NUISANCE_KINDS), "logistic"),
        "propensity": (_choice(NUISANCE_KINDS), "logistic"),
        "folds": (_int(1), 2),
        "layout": (_choice(("single", "split")), "single"),
        "oracle_nuisance": (_bool, False),
        "ci": (_choice(("analytic", "bootstrap")), "analytic"),
        "bootstrap": (_int(0), 200),
        "draws": (_int(1), 10**7),
    },
    "oracle": {
        "kind": (_choice(DGP_KINDS), "sim61"),
        "params": (parse_params, {}),
        "lambda": (parse_lambdas, [None, 0.1, 0.2, 0.3, 0.4]),
        "draws": (_int(1), 10**7),
    },
    "paradox": {
        "kind": (_choice(("example1", "example2", "example3", "appendixS1")), "example1"),
        "params": (parse_params, {}),
        "lambda": (parse_lambdas, [0.5]),
        "draws": (_int(1), 10**6),
        "n": (_int(2), 10**5),
    },
}


def resolve(command: str, flags: dict, environ=None) -> dict:
    """Merge defaults < config file < environment < flags and validate every key."""
    environ = os.environ if environ is None else environ
    schema = {**COMMON, **SCHEMAS[command]}
    raw = {k: default for k, (_, default) in schema.items()}
    cfg_path = flags.get("config")
    if cfg_path:
        try:
            doc = json.loads(Path(cfg_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config file {cfg_path}: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
        doc = {k.replace("-", "_"): v for k, v in doc.items()}
        unknown = sorted(set(doc) - set(schema))
        if unknown:
            raise ConfigError(f"unknown config keys for '{command}': {unknown}")
        raw.update(doc)
    for key in schema:
        env = environ.get(ENV_PREFIX + key.upper())
        if env is not None:
            raw[key] = env
    for key, v in flags.items():
        if key in schema and v is not None:
            raw[key] = v
    out = {}
    for key, (parse, _) in schema.items():
        try:
            out[key] = parse(raw[key])
        except ConfigError as exc:
            raise ConfigError(f"{key}: {exc}") from None
    return out


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _fmt(cfg: dict) -> str:
    if cfg["format"]:
        return cfg["format"]
    if cfg["out"] and str(cfg["out"]).lower().endswith(".csv"):
        return "csv"
    return "json"


def _emit(cfg: dict, meta: dict, rows: list[dict], columns: list[str], extra: dict | None = None, csv_rows=None):
    """Write rows as CSV (plus a ``.meta.json`` sidecar) or one JSON document."""
    fmt = _fmt(cfg)
    if fmt == "json":
        text = dumps_json({**meta, **(extra or {}), "rows": rows})
        if cfg["out"]:
            atomic_write(cfg["out"], text)
        else:
            sys.stdout.write(text)
        return
    text = csv_text(rows if csv_rows is None else csv_rows, columns)
    if cfg["out"]:
        atomic_write(cfg["out"], text)
        atomic_write(str(cfg["out"]) + ".meta.json", dumps_json({**meta, **(extra or {})}))
    else:
        sys.stdout.write(text)


def _meta(command: str, cfg: dict) -> dict:
    return {
        "tool": "surrogate-itr",
        "version": __version__,
        "command": command,
        "seed": cfg["seed"],
        "config_hash": config_hash({"command": command, **cfg}),
        # threads and the output path never change results, so they stay out of the report
        "config": {k: v for k, v in cfg.items() if k not in ("out", "threads")},
    }


def _lam_key(lam):
    return "none" if lam is None else repr(float(lam))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

ESTIMATE_COLUMNS = [
    "metric", "lambda", "point", "analytic_se", "ci_lo", "ci_hi", "level", "bootstrap_se",
    "bootstrap_lo", "bootstrap_hi", "n_main", "B_effective", "B_skipped", "seed", "config_hash",
]


def cmd_estimate(cfg: dict) -> int:
    if not cfg["input"]:
        raise ConfigError("estimate needs --input")
    d1 = read_csv(cfg["input"])
    if cfg["input_surrogate"]:
        datasets, layout = [d1, read_csv(cfg["input_surrogate"])], "split"
        if datasets[0].outcome is None:
            raise SchemaError(f"{cfg['input']}: column y is required")
        if datasets[1].surrogate is None:
            raise SchemaError(f"{cfg['input_surrogate']}: column s is required")
    else:
        datasets, layout = [d1], "single"
        missing = [c for c, v in (("y", d1.outcome), ("s", d1.surrogate)) if v is None]
        if missing:
            raise SchemaError(f"{cfg['input']}: single-file input needs columns {missing}")
    est_cfg = EstimatorConfig(
        outcome_kind=cfg["nuisance"], surrogate_kind=cfg["nuisance"], propensity_kind=cfg["propensity"],
        folds=cfg["folds"], fraction=cfg["fraction"], subsplit=cfg["subsplit"], clip=cfg["clip"],
        level=cfg["level"],
    )
    pipeline = Pipeline(layout, tuple(cfg["lambda"]), est_cfg, tuple(cfg["metric"]))
    result = pipeline.run(datasets, seeding.derive_seed(cfg["seed"], seeding.SPLIT))
    if cfg["bootstrap"]:
        boot = bootstrap_ci(
            datasets, pipeline, cfg["bootstrap"], cfg["level"],
            seeding.derive_seed(cfg["seed"], seeding.BOOTSTRAP), cfg["threads"],
        )
        result = attach_bootstrap(result, boot)
    meta = _meta("estimate", cfg)
    rows, flat = [], []
    for e in result.ordered():
        d = {**e.to_dict(), "seed": cfg["seed"], "config_hash": meta["config_hash"]}
        rows.append(d)
        blo, bhi = e.bootstrap_ci if e.bootstrap_ci is not None else (None, None)
        flat.append({**d, "ci_lo": e.ci[0], "ci_hi": e.ci[1], "bootstrap_lo": blo, "bootstrap_hi": bhi})
    _emit(cfg, meta, rows, ESTIMATE_COLUMNS, {"layout": layout}, csv_rows=flat)
    return EXIT_OK


SIMULATE_COLUMNS = ["metric", "lambda", "n", "reps", "bias", "sd", "cp95", "failures"]


def cmd_simulate(cfg: dict) -> int:
    lambdas = [lam for lam in cfg["lambda"] if lam is not None]
    est_cfg = EstimatorConfig(
        outcome_kind=cfg["nuisance"], surrogate_kind=cfg["nuisance"], propensity_kind=cfg["propensity"],
        folds=cfg["folds"], level=cfg["level"],
    )
    rc = ReplicationConfig(
        spec=DgpSpec(cfg["kind"], cfg["params"]), n=cfg["n"], reps=cfg["reps"], lambdas=tuple(lambdas),
        unconstrained=True, layout=cfg["layout"], estimator=est_cfg,
        nuisance="oracle" if cfg["oracle_nuisance"] else "fitted", ci=cfg["ci"], B=cfg["bootstrap"],
        level=cfg["level"], seed=cfg["seed"], oracle_draws=cfg["draws"], metrics=tuple(cfg["metric"]),
    )
    if rc.ci == "bootstrap" and rc.B < 100:
        raise ConfigError("bootstrap: the bootstrap CI needs B >= 100")
    report = run_replications(rc, threads=cfg["threads"])
    rows = [r.to_dict() for r in report.rows]
    extra = {
        "oracle": {_lam_key(k): v.to_dict() for k, v in report.oracle.items()},
        "failures": report.failures,
        "errors": list(report.errors),
        "nuisance_rmse": report.diagnostics,
    }
    _emit(cfg, _meta("simulate", cfg), rows, SIMULATE_COLUMNS, extra)
    return EXIT_OK


ORACLE_COLUMNS = [
    "lambda", "R", "G", "V", "mc_se_regret", "mc_se_gain", "mc_se_efficiency", "draws",
    "threshold_y", "threshold_s", "ate",
]


def cmd_oracle(cfg: dict) -> int:
    spec = DgpSpec(cfg["kind"], cfg["params"])
    table = oracle_table(spec, cfg["lambda"], cfg["draws"], seeding.derive_seed(cfg["seed"], seeding.ORACLE))
    rows, analytic_keys, warnings = [], [], []
    for lam in cfg["lambda"]:
        t = table[lam].to_dict()
        row = {k: t[k] for k in ("lambda", "R", "G", "V", "draws", "threshold_y", "threshold_s", "ate")}
        for m in METRICS:
            row[f"mc_se_{m}"] = t["mc_se"][m]
        for k, v in t["analytic"].items():
            row[f"analytic_{k}"] = v
            if f"analytic_{k}" not in analytic_keys:
                analytic_keys.append(f"analytic_{k}")
        row["warnings"] = t["warnings"]
        warnings.extend(w for w in t["warnings"] if w not in warnings)
        rows.append(row)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    _emit(cfg, _meta("oracle", cfg), rows, ORACLE_COLUMNS + analytic_keys + ["warnings"], {"warnings": warnings})
    return EXIT_OK


def paradox_report(kind: str, params: dict, lambdas, draws: int, n: int, seed: int) -> dict:
    """Analytic quantities, oracle values and rule agreement for one paradox world."""
    spec = DgpSpec(kind, params)
    p = spec.params
    budgets = [None] + [lam for lam in lambdas if lam is not None]
    oracle = oracle_table(spec, budgets, draws, seeding.derive_seed(seed, seeding.ORACLE))
    report = {"kind": kind, "params": p, "oracle": {_lam_key(k): v.to_dict() for k, v in oracle.items()}}
    agreement = {}

    if kind == "appendixS1":
        w = gen_appendix_s1()
        vy, vs, vr = w.value(w.outcome_rule()), w.value(w.surrogate_rule()), w.random_value(1)
        report.update(
            tau_y=[str(t) for t in w.tau_y()],
            tau_s=[str(t) for t in w.tau_s()],
            outcome_rule=list(w.outcome_rule()),
            surrogate_rule=list(w.surrogate_rule()),
            outcome_rule_value=str(vy),
            surrogate_rule_value=str(vs),
            random_rule_value=str(vr),
            surrogate_rule_worse_than_random=bool(vs < vr),
        )
        agreement["none"] = policy_agreement(np.array(w.outcome_rule()), np.array(w.surrogate_rule()))
        report["agreement"] = agreement
        return report

    if kind in ("example1", "example2"):
        tau_y, tau_s = (-1.0, 1.0) if kind == "example1" else (p["alpha"], -p["alpha"])
        report.update(tau_y=tau_y, tau_s=tau_s)
        report["outcome_rule_treats_all"] = tau_y > 0
        report["surrogate_rule_treats_all"] = tau_s > 0
        report["opposite_rules"] = (tau_y > 0) != (tau_s > 0)
        table, pot = gen_example(kind, p, n, seeding.derive_seed(seed, seeding.DATA))
        if kind == "example1":
            report["rho_analytic"] = example1_correlation(p["alpha"])
            report["rho_sample"] = float(np.corrcoef(table.surrogate, table.outcome)[0, 1])
        else:
            report["rho_potential_analytic"] = example2_correlation(p["beta"])
            report["rho_potential_sample"] = float(np.corrcoef(pot.s1, pot.y1)[0, 1])
        report["sample_n"] = n
        agreement["none"] = policy_agreement(np.array([float(tau_y > 0)]), np.array([float(tau_s > 0)]))
        for lam in budgets[1:]:
            # a constant CATE equals its own quantile, so only lambda = 1 treats anyone
            one = np.array([1.0 if lam == 1.0 else 0.0])
            agreement[_lam_key(lam)] = policy_agreement(one * (tau_y > 0), one * (tau_s > 0))
        report["agreement"] = agreement
        return report

    # example3
    report.update(tau_y=f"{p['alpha']} - {p['beta']}*x", tau_s=f"{p['alpha']} + {p['beta']}*x")
    X = seeding.generator(seed, seeding.ORACLE, 1).random(draws)[:, None]
    ty, ts = true_cates(spec, X)
    agreement["none"] = policy_agreement(plugin_policy(ty), plugin_policy(ts))
    for lam in budgets[1:]:
        py = budget_assignments(ty, empirical_quantile(ty, lam))
        ps = budget_assignments(ts, empirical_quantile(ts, lam))
        agreement[_lam_key(lam)] = policy_agreement(py, ps)
    report["agreement"] = agreement
    report["agreement_draws"] = draws
    return report


PARADOX_COLUMNS = ["kind", "lambda", "agreement", "R", "G", "V"]


def cmd_paradox(cfg: dict) -> int:
    report = paradox_report(cfg["kind"], cfg["params"], cfg["lambda"], cfg["draws"], cfg["n"], cfg["seed"])
    rows = []
    for key, agree in report["agreement"].items():
        o = report["oracle"][key]
        rows.append({"kind": report["kind"], "lambda": o["lambda"], "agreement": agree, "R": o["R"], "G": o["G"], "V": o["V"]})
    _emit(cfg, _meta("paradox", cfg), rows, PARADOX_COLUMNS, {"report": report})
    return EXIT_OK


COMMANDS = {"estimate": cmd_estimate, "simulate": cmd_simulate, "oracle": cmd_oracle, "paradox": cmd_paradox}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="surrogate-itr", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", help="master seed (default: fresh entropy, recorded in the output)")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--format", help="csv or json (default: from --out suffix, else json)")
        p.add_argument("--threads", help="worker processes")
        p.add_argument("--level", help="confidence level")
        p.add_argument("--config", help="JSON file of settings")

    p = sub.add_parser("estimate", help="doubly robust estimates from CSV data")
    common(p)
    p.add_argument("--input", help="CSV with x1..xd,a,y[,s]")
    p.add_argument("--input-surrogate", dest="input_surrogate", help="second CSV with x1..xd,a,s")
    p.add_argument("--lambda", help="comma list of budgets; 'none' is the unconstrained rule")
    p.add_argument("--metric", help="comma list from regret,gain,efficiency")
    p.add_argument("--nuisance", help="outcome/surrogate learner: logistic, stumps or mean")
    p.add_argument("--propensity", help="propensity learner: logistic, stumps or mean")
    p.add_argument("--folds", help="K cross-fitting folds (1 = single sample split)")
    p.add_argument("--fraction", help="main-sample share when folds = 1")
    p.add_argument("--clip", help="propensity clipping epsilon")
    p.add_argument("--subsplit", help="fit outcome and surrogate models on disjoint halves (true/false)")
    p.add_argument("--bootstrap", help="bootstrap resamples B (0 = none)")

    p = sub.add_parser("simulate", help="Monte Carlo replication study")
    common(p)
    p.add_argument("--kind", help="DGP: sim61, example1, example2, example3")
    p.add_argument("--params", help="DGP parameters as key=value,...")
    p.add_argument("--n", help="rows per replication")
    p.add_argument("--reps", help="number of replications (>= 2)")
    p.add_argument("--lambda", help="comma list of budgets")
    p.add_argument("--metric", help="comma list of metrics")
    p.add_argument("--nuisance", help="outcome/surrogate learner")
    p.add_argument("--propensity", help="propensity learner")
    p.add_argument("--folds", help="K cross-fitting folds")
    p.add_argument("--layout", help="single (one dataset) or split (two datasets of n rows)")
    p.add_argument("--oracle-nuisance", dest="oracle_nuisance", help="inject the true nuisances (true/false)")
    p.add_argument("--ci", help="analytic or bootstrap")
    p.add_argument("--bootstrap", help="bootstrap resamples per replication when --ci bootstrap")
    p.add_argument("--draws", help="oracle Monte Carlo draws")

    p = sub.add_parser("oracle", help="ground-truth R, G, V by brute force")
    common(p)
    p.add_argument("--kind", help="DGP kind")
    p.add_argument("--params", help="DGP parameters as key=value,...")
    p.add_argument("--lambda", help="comma list of budgets; 'none' is the unconstrained rule")
    p.add_argument("--draws", help="Monte Carlo draws")

    p = sub.add_parser("paradox", help="surrogate paradox demonstrations")
    common(p)
    p.add_argument("--kind", help="example1, example2, example3 or appendixS1")
    p.add_argument("--params", help="parameters as key=value,...")
    p.add_argument("--lambda", help="comma list of budgets")
    p.add_argument("--draws", help="Monte Carlo draws for oracle values and agreement")
    p.add_argument("--n", help="sample size for empirical correlations")
    return ap


def main(argv=None) -> int:
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    try:
        cfg = resolve(command, args)
        if cfg["seed"] is None:
            cfg["seed"] = seeding.fresh_seed()
            print(f"seed: {cfg['seed']} (fresh entropy)", file=sys.stderr)
        code = COMMANDS[command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except EstimationError as exc:
        print(f"estimation error in stage {exc.stage}: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return code


if __name__ == "__main__":
    sys.exit(main())
