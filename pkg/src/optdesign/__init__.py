"""Locally D- and A-optimal approximate designs found by differential evolution."""

from optdesign.criteria import (
    CertificationReport,
    CriterionKind,
    GridSpec,
    SingularDesignError,
    a_criterion,
    a_sensitivity,
    criterion_value,
    d_criterion,
    d_sensitivity,
    efficiency_bound,
    sensitivity,
)
from optdesign.design import Design, DesignError, DesignSpace, clamp_to_space, information_matrix
from optdesign.encoding import Encoding, RepairConfig, decode, encode, repair
from optdesign.engines import EngineConfig, ParamMemory, RunRecord, Variant, run
from optdesign.harness import (
    ComparisonCell,
    ExperimentPlan,
    SummaryRow,
    aggregate_comparison,
    run_experiment,
    wilcoxon_rank_sum,
)
from optdesign.models import PROBLEMS, ProblemSpec, get_problem, mean_gradient, unit_information
from optdesign.objective import DesignObjective

__version__ = "0.1.0"

__all__ = [
    "CertificationReport",
    "ComparisonCell",
    "CriterionKind",
    "Design",
    "DesignError",
    "DesignObjective",
    "DesignSpace",
    "Encoding",
    "EngineConfig",
    "ExperimentPlan",
    "GridSpec",
    "PROBLEMS",
    "ParamMemory",
    "ProblemSpec",
    "RepairConfig",
    "RunRecord",
    "SingularDesignError",
    "SummaryRow",
    "Variant",
    "a_criterion",
    "a_sensitivity",
    "aggregate_comparison",
    "clamp_to_space",
    "criterion_value",
    "d_criterion",
    "d_sensitivity",
    "decode",
    "efficiency_bound",
    "encode",
    "get_problem",
    "information_matrix",
    "mean_gradient",
    "repair",
    "run",
    "run_experiment",
    "sensitivity",
    "unit_information",
    "wilcoxon_rank_sum",
]
