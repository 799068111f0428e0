"""Fair division of item copies among groups, with exact verification.

The package covers: instance modeling over item types with multiplicities,
mechanisms producing fractional shares, LP-based gap optimization, integral
rounding with additive loss guarantees, sufficient-condition checks with
copy thresholds, a cake-cutting discretization protocol, a leading-agent
greedy allocator, and a stochastic experiment harness.  All fairness
verdicts are computed in rational arithmetic.
"""

__version__ = "0.1.0"

from . import errors
from .cake import (
    CakeOracle,
    PiecewiseLinearDensity,
    ProtocolResult,
    QueryMeter,
    integrate_product,
    run_protocol,
)
from .conditions import (
    ConditionReport,
    DiscretizationPlan,
    cake_epsilon,
    copies_slack_chores,
    copies_slack_goods,
    dilution_slack_log,
    dilution_slack_squared,
    ef_condition_chores,
    ef_condition_goods,
    mu_bound_chores,
    mu_bound_goods,
    prop_condition,
    tefx_condition,
)
from .core import (
    NOTIONS,
    FractionalAllocation,
    GapReport,
    Instance,
    IntegralAllocation,
    Thresholds,
    VerifyResult,
    Witness,
    divergence,
    efx_holds,
    gap_report,
    is_complete,
    l1_normalized,
    l2_normalized,
    normalize,
    thresholds,
    verify,
)
from .experiments import (
    TARGETS,
    ExperimentConfig,
    ExperimentReport,
    TrialResult,
    emit_report,
    parse_report,
    run_experiment,
)
from .frobenius import Decomposition, decompose, is_representable
from .greedy import GreedyTrace, greedy_allocate
from .mechanisms import (
    MechanismOutput,
    inverse_trading_post,
    log_relative_norm,
    relative_norm,
    trading_post,
)
from .pipeline import PipelineResult, check_copy_preconditions, pipeline_allocate
from .rounding import RoundingTrace, round_envy, round_proportional
from .serialization import (
    parse_allocation,
    parse_density_spec,
    parse_instance,
    serialize_allocation,
    serialize_instance,
)

__all__ = [
    "CakeOracle",
    "ConditionReport",
    "Decomposition",
    "DiscretizationPlan",
    "ExperimentConfig",
    "ExperimentReport",
    "FractionalAllocation",
    "GapReport",
    "GreedyTrace",
    "Instance",
    "IntegralAllocation",
    "MechanismOutput",
    "NOTIONS",
    "PipelineResult",
    "PiecewiseLinearDensity",
    "ProtocolResult",
    "QueryMeter",
    "RoundingTrace",
    "TARGETS",
    "Thresholds",
    "TrialResult",
    "VerifyResult",
    "Witness",
    "cake_epsilon",
    "check_copy_preconditions",
    "copies_slack_chores",
    "copies_slack_goods",
    "decompose",
    "dilution_slack_log",
    "dilution_slack_squared",
    "divergence",
    "ef_condition_chores",
    "ef_condition_goods",
    "efx_holds",
    "emit_report",
    "errors",
    "gap_report",
    "greedy_allocate",
    "integrate_product",
    "inverse_trading_post",
    "is_complete",
    "is_representable",
    "l1_normalized",
    "l2_normalized",
    "log_relative_norm",
    "mu_bound_chores",
    "mu_bound_goods",
    "normalize",
    "parse_allocation",
    "parse_density_spec",
    "parse_instance",
    "parse_report",
    "pipeline_allocate",
    "prop_condition",
    "relative_norm",
    "round_envy",
    "round_proportional",
    "run_experiment",
    "run_protocol",
    "serialize_allocation",
    "serialize_instance",
    "tefx_condition",
    "thresholds",
    "trading_post",
    "verify",
]
