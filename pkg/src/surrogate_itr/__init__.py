"""Doubly robust evaluation of surrogate endpoints for individualized treatment rules."""

from .crossfit import (
    BootstrapResult,
    CrossFitResult,
    EstimationError,
    EstimatorConfig,
    Pipeline,
    attach_bootstrap,
    bootstrap_ci,
    crossfit_single,
    crossfit_split,
    fit_nuisance,
)
from .data import ObservationTable, SchemaError, SplitPlan, kfold, read_csv, split_half, validate
from .estimators import (
    METRICS,
    MetricEstimate,
    NuisanceBundle,
    estimate_metric,
    influence_values,
    ipw_residual,
    lemma2_bias,
    omega_gain,
    phi_regret,
    psi_efficiency,
)
from .policy import (
    NO_BUDGET,
    BudgetPolicy,
    CateVector,
    budget_policy,
    cate,
    empirical_quantile,
    plugin_policy,
    policy_agreement,
)

__version__ = "0.1.0"

__all__ = [
    "BootstrapResult",
    "BudgetPolicy",
    "CateVector",
    "CrossFitResult",
    "EstimationError",
    "EstimatorConfig",
    "METRICS",
    "MetricEstimate",
    "NO_BUDGET",
    "NuisanceBundle",
    "ObservationTable",
    "Pipeline",
    "SchemaError",
    "SplitPlan",
    "attach_bootstrap",
    "bootstrap_ci",
    "budget_policy",
    "cate",
    "crossfit_single",
    "crossfit_split",
    "empirical_quantile",
    "estimate_metric",
    "fit_nuisance",
    "influence_values",
    "ipw_residual",
    "kfold",
    "lemma2_bias",
    "omega_gain",
    "phi_regret",
    "plugin_policy",
    "policy_agreement",
    "psi_efficiency",
    "read_csv",
    "split_half",
    "validate",
]
