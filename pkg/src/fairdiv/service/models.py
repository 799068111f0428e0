"""Request and response schemas for the HTTP service.

Instances travel in the same shape as the on-disk JSON format (rationals
as "p/q" strings); requests are re-validated by the serialization layer so
wire and file inputs share one set of diagnostics.
"""

from __future__ import annotations

from typing import Any, Literal, Optional, Union

from pydantic import BaseModel, Field

Rational = Union[str, int]


class GroupModel(BaseModel):
    size: int


class TypeModel(BaseModel):
    copies: int
    values: list[Rational]


class InstanceModel(BaseModel):
    kind: Literal["goods", "chores"]
    groups: list[GroupModel]
    types: list[TypeModel]


class AllocationModel(BaseModel):
    counts: list[list[int]]


class AllocateRequest(BaseModel):
    instance: InstanceModel
    force: bool = False


class CheckRequest(BaseModel):
    instance: InstanceModel
    condition: Literal["ef", "prop", "tefx"]


class MuBoundRequest(BaseModel):
    instance: InstanceModel


class VerifyRequest(BaseModel):
    instance: InstanceModel
    allocation: AllocationModel
    notion: Literal["EF", "STRONG_EF", "PROP", "STRONG_PROP", "TEFX"]


class FrobeniusRequest(BaseModel):
    sizes: list[int] = Field(min_length=1)
    k: int


class CakeRequest(BaseModel):
    # One density per agent: [breakpoint, value] pairs with rational entries.
    densities: list[list[tuple[Rational, Rational]]]
    delta: Optional[Rational] = None
    lipschitz: Optional[Rational] = None


class GreedyRequest(BaseModel):
    instance: InstanceModel


class ExperimentRequest(BaseModel):
    n: int
    m: int
    trials: int
    seed: int
    kind: Literal["goods", "chores"]
    target: Literal[
        "PROP_CONDITION", "PROP_ALLOCATION", "CHI2_BOUND", "CHORES_PENALTY_BOUND"
    ]
    workers: Optional[int] = None


# ---------------------------------------------------------------------------
# Responses.  Exact rationals are serialized as strings; floats that may be
# non-finite are sent as null with an explanatory flag in `details`.


class ConditionModel(BaseModel):
    condition: str
    satisfied: bool
    lhs: Optional[float]
    threshold: Optional[float]
    direction: str
    margin: Optional[float]
    mu_bound: Optional[int] = None
    details: dict[str, Any] = Field(default_factory=dict)


class WitnessModel(BaseModel):
    group: int
    other: int
    item_type: Optional[int] = None


class VerifyModel(BaseModel):
    notion: str
    holds: bool
    witness: Optional[WitnessModel] = None


class GapModel(BaseModel):
    kind: str
    pair_gaps: list[list[str]]
    min_gap: Optional[str]
    exact: bool


class TraceModel(BaseModel):
    pooled_total: int
    pool_bound: int
    gap_loss_constant: int
    undistributed: bool


class AllocateResponse(BaseModel):
    exit_code: int
    mechanism: str
    lp_objective: Optional[float]
    allocation: AllocationModel
    condition: ConditionModel
    gaps: GapModel
    trace: TraceModel
    verified: VerifyModel
    notes: list[str]


class CheckResponse(BaseModel):
    condition: ConditionModel
    exit_code: int


class MuBoundResponse(BaseModel):
    report: ConditionModel
    exit_code: int


class VerifyResponse(BaseModel):
    result: VerifyModel
    exit_code: int


class FrobeniusResponse(BaseModel):
    representable: bool
    coefficients: Optional[list[int]]
    g: int
    theta: int
    exit_code: int


class CakeResponse(BaseModel):
    pieces: int
    epsilon: str
    query_budget: int
    eval_count: int
    cut_count: int
    allocation: AllocationModel
    intervals: list[list[tuple[str, str]]]
    condition: ConditionModel
    verified_strong: VerifyModel
    verified_ef: VerifyModel
    preconditions_ok: bool
    effective_lipschitz: float
    effective_separation: float
    notes: list[str]
    exit_code: int


class GreedyResponse(BaseModel):
    allocation: AllocationModel
    item_order: list[int]
    recipients: list[int]
    tefx: VerifyModel
    efx_holds: bool
    exit_code: int


class HealthResponse(BaseModel):
    status: str
    version: str
