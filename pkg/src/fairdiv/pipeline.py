"""End-to-end allocation pipeline: mechanism, gap LP, sparsify, round, verify.

The pipeline wires the closed-form fractional mechanism for the instance
kind into the gap-maximization LP, extracts a sparse vertex solution,
rounds it to a group-level integral allocation, and verifies envy-freeness
exactly.  The relevant existence condition is evaluated alongside so
callers can tell whether an EF outcome was guaranteed or incidental.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .conditions import ConditionReport, ef_condition_chores, ef_condition_goods
from .core import (
    FractionalAllocation,
    GapReport,
    Instance,
    IntegralAllocation,
    VerifyResult,
    gap_report,
    is_complete,
    thresholds,
    verify,
)
from .errors import PreconditionError
from .lp import build_gap_lp, solve, sparsify_to_vertex
from .mechanisms import log_relative_norm, relative_norm
from .rounding import RoundingTrace, round_envy


@dataclass
class PipelineResult:
    instance: Instance
    condition: ConditionReport
    mechanism: str
    fractional: FractionalAllocation
    lp_objective: Optional[float]
    allocation: IntegralAllocation
    trace: RoundingTrace
    gaps: GapReport
    verified: VerifyResult
    notes: list[str] = field(default_factory=list)

    @property
    def exit_status(self) -> int:
        """0 when the fairness notion verified, 2 when a result was returned anyway."""
        return 0 if self.verified.holds else 2


def check_copy_preconditions(instance: Instance) -> list[int]:
    """Types whose copy counts break the rounding preconditions."""
    th = thresholds(instance.group_sizes)
    return [
        z
        for z, k in enumerate(instance.type_copies)
        if k < th.theta or k % th.g != 0
    ]


def pipeline_allocate(instance: Instance, force: bool = False) -> PipelineResult:
    """Run the full EF pipeline on a goods or chores instance.

    Copy counts must be at least the representability threshold and
    divisible by the size gcd; violations abort with a precondition error
    unless ``force`` is set, in which case the run continues best-effort
    and may return an incomplete allocation.
    """
    notes: list[str] = []
    bad = check_copy_preconditions(instance)
    if bad:
        th = thresholds(instance.group_sizes)
        if not force:
            err = PreconditionError(
                f"copy counts of types {bad} must be >= {th.theta} and divisible by {th.g}"
            )
            err.report = {
                "bad_types": bad,
                "theta": th.theta,
                "g": th.g,
            }
            raise err
        notes.append(
            f"copy preconditions violated for types {bad}; forced best-effort run"
        )

    if instance.kind == "goods":
        condition = ef_condition_goods(instance)
        output = relative_norm(instance)
    else:
        condition = ef_condition_chores(instance)
        output = log_relative_norm(instance)

    lp_objective: Optional[float] = None
    if instance.d >= 2:
        lp = build_gap_lp(instance)
        solution = solve(lp)
        lp_objective = solution.objective_value
        fractional, _ = sparsify_to_vertex(solution, instance)
    else:
        # One group: the mechanism's uniform shares are already optimal.
        fractional = output.allocation

    allocation, trace = round_envy(
        instance, fractional, enforce_preconditions=not force
    )
    gaps = gap_report(instance, allocation)

    if is_complete(instance, allocation):
        verified = verify(instance, allocation, "EF")
    else:
        notes.append("allocation is incomplete; envy-freeness not verifiable")
        verified = VerifyResult(notion="EF", holds=False, witness=None)

    return PipelineResult(
        instance=instance,
        condition=condition,
        mechanism=output.name,
        fractional=fractional,
        lp_objective=lp_objective,
        allocation=allocation,
        trace=trace,
        gaps=gaps,
        verified=verified,
        notes=notes,
    )
