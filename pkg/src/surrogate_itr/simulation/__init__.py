from .dgp import (
    DgpSpec,
    DiscreteWorld,
    PotentialTable,
    example1_correlation,
    example2_correlation,
    gen_appendix_s1,
    gen_example,
    gen_sim61,
    true_cates,
    true_regressors,
)
from .oracle import OracleTruth, oracle_table, oracle_truth, sign_rule_regret
from .replicate import ReplicationConfig, ReplicationReport, replicate_data, run_replications

__all__ = [
    "DgpSpec",
    "DiscreteWorld",
    "PotentialTable",
    "example1_correlation",
    "example2_correlation",
    "gen_appendix_s1",
    "gen_example",
    "gen_sim61",
    "true_cates",
    "true_regressors",
    "OracleTruth",
    "oracle_table",
    "oracle_truth",
    "sign_rule_regret",
    "ReplicationConfig",
    "ReplicationReport",
    "replicate_data",
    "run_replications",
]
