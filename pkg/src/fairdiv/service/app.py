"""HTTP service exposing the allocation pipelines.

Every route is a POST taking JSON and returning JSON; errors map to a
structured body with a stable ``error`` slug.  Exit-code semantics mirror
the CLI: 0 when the requested property verified, 2 when a result was
produced but the property did not hold.
"""

from __future__ import annotations

import json
import math
from fractions import Fraction
from typing import Any

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..cake import PiecewiseLinearDensity, run_protocol
from ..conditions import (
    ConditionReport,
    ef_condition_chores,
    ef_condition_goods,
    mu_bound_chores,
    mu_bound_goods,
    prop_condition,
    tefx_condition,
)
from ..core import (
    GapReport,
    Instance,
    IntegralAllocation,
    VerifyResult,
    efx_holds,
    is_complete,
    thresholds,
    verify,
)
from ..errors import (
    FairdivError,
    InternalInvariantError,
    ParseError,
    PreconditionError,
    SolverError,
)
from ..experiments import ExperimentConfig, emit_report, run_experiment
from ..frobenius import decompose
from ..greedy import greedy_allocate
from ..pipeline import pipeline_allocate
from ..serialization import parse_allocation, parse_instance
from . import models


def _status_for(exc: FairdivError) -> int:
    if isinstance(exc, (SolverError, InternalInvariantError)):
        return 500
    if isinstance(exc, PreconditionError):
        return 409
    return 400


def _error_body(exc: FairdivError) -> dict[str, Any]:
    body: dict[str, Any] = {
        "error": type(exc).__name__,
        "message": str(exc),
    }
    if isinstance(exc, ParseError) and exc.location:
        body["location"] = exc.location
    if isinstance(exc, PreconditionError) and exc.report is not None:
        body["report"] = _jsonable(exc.report)
    return body


def _jsonable(value: Any) -> Any:
    """Recursively coerce report payloads to strict-JSON values."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        value = float(value)
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _fin(value: float) -> float | None:
    return value if math.isfinite(value) else None


def _instance_from_model(model: models.InstanceModel) -> Instance:
    return parse_instance(json.dumps(model.model_dump()))


def _allocation_from_model(
    model: models.AllocationModel, instance: Instance
) -> IntegralAllocation:
    return parse_allocation(json.dumps(model.model_dump()), instance)


def _condition_model(report: ConditionReport) -> models.ConditionModel:
    return models.ConditionModel(
        condition=report.condition,
        satisfied=report.satisfied,
        lhs=_fin(report.lhs),
        threshold=_fin(report.threshold),
        direction=report.direction,
        margin=_fin(report.margin),
        mu_bound=report.mu_bound,
        details=_jsonable(report.details),
    )


def _verify_model(result: VerifyResult) -> models.VerifyModel:
    witness = None
    if result.witness is not None:
        witness = models.WitnessModel(
            group=result.witness.group,
            other=result.witness.other,
            item_type=result.witness.item_type,
        )
    return models.VerifyModel(notion=result.notion, holds=result.holds, witness=witness)


def _gap_model(report: GapReport) -> models.GapModel:
    return models.GapModel(
        kind=report.kind,
        pair_gaps=[[str(g) for g in row] for row in report.pair_gaps],
        min_gap=str(report.min_gap) if report.min_gap is not None else None,
        exact=report.exact,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="fairdiv", version=__version__)

    @app.exception_handler(FairdivError)
    async def fairdiv_error_handler(request: Request, exc: FairdivError):
        return JSONResponse(status_code=_status_for(exc), content=_error_body(exc))

    @app.get("/healthz", response_model=models.HealthResponse)
    def healthz() -> models.HealthResponse:
        return models.HealthResponse(status="ok", version=__version__)

    @app.post("/allocate", response_model=models.AllocateResponse)
    def allocate(request: models.AllocateRequest) -> models.AllocateResponse:
        instance = _instance_from_model(request.instance)
        result = pipeline_allocate(instance, force=request.force)
        trace = models.TraceModel(
            pooled_total=result.trace.pooled_total,
            pool_bound=result.trace.pool_bound,
            gap_loss_constant=result.trace.gap_loss_constant,
            undistributed=not is_complete(instance, result.allocation),
        )
        return models.AllocateResponse(
            exit_code=result.exit_status,
            mechanism=result.mechanism,
            lp_objective=_fin(result.lp_objective)
            if result.lp_objective is not None
            else None,
            allocation=models.AllocationModel(
                counts=[list(row) for row in result.allocation.counts]
            ),
            condition=_condition_model(result.condition),
            gaps=_gap_model(result.gaps),
            trace=trace,
            verified=_verify_model(result.verified),
            notes=list(result.notes),
        )

    @app.post("/check", response_model=models.CheckResponse)
    def check(request: models.CheckRequest) -> models.CheckResponse:
        instance = _instance_from_model(request.instance)
        if request.condition == "ef":
            report = (
                ef_condition_goods(instance)
                if instance.kind == "goods"
                else ef_condition_chores(instance)
            )
        elif request.condition == "prop":
            report = prop_condition(instance)
        else:
            report = tefx_condition(instance)
        return models.CheckResponse(
            condition=_condition_model(report),
            exit_code=0 if report.satisfied else 2,
        )

    @app.post("/mu-bound", response_model=models.MuBoundResponse)
    def mu_bound(request: models.MuBoundRequest) -> models.MuBoundResponse:
        instance = _instance_from_model(request.instance)
        report = (
            mu_bound_goods(instance)
            if instance.kind == "goods"
            else mu_bound_chores(instance)
        )
        return models.MuBoundResponse(
            report=_condition_model(report),
            exit_code=0 if report.satisfied else 2,
        )

    @app.post("/verify", response_model=models.VerifyResponse)
    def verify_route(request: models.VerifyRequest) -> models.VerifyResponse:
        instance = _instance_from_model(request.instance)
        allocation = _allocation_from_model(request.allocation, instance)
        result = verify(instance, allocation, request.notion)
        return models.VerifyResponse(
            result=_verify_model(result),
            exit_code=0 if result.holds else 2,
        )

    @app.post("/frobenius", response_model=models.FrobeniusResponse)
    def frobenius_route(request: models.FrobeniusRequest) -> models.FrobeniusResponse:
        th = thresholds(request.sizes)
        dec = decompose(request.sizes, request.k)
        return models.FrobeniusResponse(
            representable=dec is not None,
            coefficients=list(dec.coefficients) if dec is not None else None,
            g=th.g,
            theta=th.theta,
            exit_code=0 if dec is not None else 2,
        )

    @app.post("/cake", response_model=models.CakeResponse)
    def cake_route(request: models.CakeRequest) -> models.CakeResponse:
        densities = [
            PiecewiseLinearDensity(
                breakpoints=[Fraction(p) for p, _ in agent],
                values=[Fraction(v) for _, v in agent],
            )
            for agent in request.densities
        ]
        delta = Fraction(request.delta) if request.delta is not None else None
        lipschitz = (
            Fraction(request.lipschitz) if request.lipschitz is not None else None
        )
        result = run_protocol(densities, delta=delta, lipschitz_k=lipschitz)
        intervals = [
            [(str(a), str(b)) for a, b in result.intervals_of(i)]
            for i in range(len(densities))
        ]
        return models.CakeResponse(
            pieces=result.pieces,
            epsilon=str(result.epsilon),
            query_budget=result.plan.query_budget,
            eval_count=result.meter.eval_count,
            cut_count=result.meter.cut_count,
            allocation=models.AllocationModel(
                counts=[list(row) for row in result.allocation.counts]
            ),
            intervals=intervals,
            condition=_condition_model(result.condition),
            verified_strong=_verify_model(result.verified_strong),
            verified_ef=_verify_model(result.verified_ef),
            preconditions_ok=result.preconditions_ok,
            effective_lipschitz=result.effective_lipschitz,
            effective_separation=result.effective_separation,
            notes=list(result.notes),
            exit_code=0 if result.verified_strong.holds else 2,
        )

    @app.post("/greedy", response_model=models.GreedyResponse)
    def greedy_route(request: models.GreedyRequest) -> models.GreedyResponse:
        instance = _instance_from_model(request.instance)
        allocation, trace = greedy_allocate(instance)
        tefx = verify(instance, allocation, "TEFX")
        efx = efx_holds(instance, allocation)
        return models.GreedyResponse(
            allocation=models.AllocationModel(
                counts=[list(row) for row in allocation.counts]
            ),
            item_order=list(trace.item_order),
            recipients=list(trace.recipients),
            tefx=_verify_model(tefx),
            efx_holds=efx.holds,
            exit_code=0 if tefx.holds else 2,
        )

    @app.post("/experiment")
    def experiment_route(request: models.ExperimentRequest) -> dict[str, Any]:
        config = ExperimentConfig(
            n=request.n,
            m=request.m,
            trials=request.trials,
            seed=request.seed,
            kind=request.kind,
            target=request.target,
        )
        report = run_experiment(config, workers=request.workers)
        return json.loads(emit_report(report, "json"))

    return app
