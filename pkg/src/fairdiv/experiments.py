"""Stochastic experiment harness over i.i.d. uniform valuations.

Each trial samples an n-agent, m-item instance with every value drawn
uniformly from [0, 1] as a dyadic rational a/2^53, so floats represent the
samples exactly and rational re-verification is always available.  Four
trial predicates are supported:

* ``CHI2_BOUND`` (goods): every agent's chi-squared divergence from the
  society-average normalized valuation reaches (n-3)/(3n).
* ``CHORES_PENALTY_BOUND`` (chores): every agent's summed squared deviation
  of normalized costs from the per-item harmonic means reaches 5/16.
* ``PROP_CONDITION``: the proportionality condition holds for the sampled
  instance (slack reported as the quantity).
* ``PROP_ALLOCATION``: mechanism, share LP, and rounding produce an
  allocation that verifies proportional in exact arithmetic.

Quantities are oriented so success always means quantity >= threshold.
Scalar predicates run in floats and fall back to exact rationals whenever
the float quantity lands within 1e-9 of the threshold; PROP_ALLOCATION is
verified exactly on every trial.

Determinism: trial ``j`` of a run seeded with ``s`` draws from
``default_rng(SeedSequence([s, j]))``.  Reports are therefore identical
across runs and across worker counts.
"""

from __future__ import annotations

import json
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from itertools import repeat
from typing import Optional

import numpy as np

from .core import FractionalAllocation, Instance, l1_normalized, verify
from .errors import InstanceError, InternalInvariantError, ParseError
from .lp import build_prop_lp, solve
from .mechanisms import inverse_trading_post, trading_post
from .rounding import round_proportional

TARGETS: tuple[str, ...] = (
    "PROP_CONDITION",
    "PROP_ALLOCATION",
    "CHI2_BOUND",
    "CHORES_PENALTY_BOUND",
)

SCHEMA_VERSION = 1

_DENOM = 2**53
_TIE_TOL = 1e-9


@dataclass(frozen=True)
class ExperimentConfig:
    """Immutable description of one experiment run."""

    n: int
    m: int
    trials: int
    seed: int
    kind: str
    target: str

    def __post_init__(self):
        if self.kind not in ("goods", "chores"):
            raise InstanceError(f"kind must be 'goods' or 'chores', got {self.kind!r}")
        if self.target not in TARGETS:
            raise InstanceError(f"unknown target {self.target!r}")
        if self.trials < 1:
            raise InstanceError("trials must be at least 1")
        if self.n < 2:
            raise InstanceError("experiments need at least 2 agents")
        if self.m < 1:
            raise InstanceError("experiments need at least 1 item")
        if not 0 <= self.seed < 2**64:
            raise InstanceError("seed must be a 64-bit nonnegative integer")
        if self.target == "CHI2_BOUND" and self.kind != "goods":
            raise InstanceError("CHI2_BOUND is a goods target")
        if self.target == "CHORES_PENALTY_BOUND" and self.kind != "chores":
            raise InstanceError("CHORES_PENALTY_BOUND is a chores target")


@dataclass(frozen=True)
class TrialResult:
    trial: int
    success: bool
    quantity: float
    threshold: float
    exact_checked: bool


@dataclass(frozen=True)
class ExperimentReport:
    """Per-trial rows plus exact aggregates derived from them."""

    config: ExperimentConfig
    rows: tuple[TrialResult, ...]
    schema_version: int = SCHEMA_VERSION

    @property
    def successes(self) -> int:
        return sum(1 for row in self.rows if row.success)

    @property
    def success_fraction(self) -> Fraction:
        return Fraction(self.successes, len(self.rows))

    @property
    def min_quantity(self) -> float:
        return min(row.quantity for row in self.rows)

    @property
    def median_quantity(self) -> float:
        return statistics.median(row.quantity for row in self.rows)


# ---------------------------------------------------------------------------
# Sampling


def _sample_units(rng: np.random.Generator, n: int, m: int, kind: str) -> np.ndarray:
    """Numerators of the dyadic samples: value[i][j] = units[i][j] / 2^53."""
    if kind == "chores":
        # Strictly positive costs.
        return rng.integers(1, _DENOM + 1, size=(n, m), dtype=np.int64)
    units = rng.integers(0, _DENOM, size=(n, m), dtype=np.int64)
    for i in range(n):
        while not units[i].any():
            units[i] = rng.integers(0, _DENOM, size=m, dtype=np.int64)
    return units


def _units_to_instance(units: np.ndarray, kind: str) -> Instance:
    n, m = units.shape
    values = [[Fraction(int(a), _DENOM) for a in row] for row in units]
    return Instance([1] * n, [1] * m, values, kind)


# ---------------------------------------------------------------------------
# Float fast paths; the 1/2^53 scale cancels under row normalization,
# so these work on the integer numerators directly.


def _normalized_rows_float(units: np.ndarray) -> np.ndarray:
    u = units.astype(np.float64)
    return u / u.sum(axis=1, keepdims=True)


def _chi2_per_agent_float(rows: np.ndarray) -> np.ndarray:
    society = rows.mean(axis=0)
    mask = society > 0.0
    diff = rows[:, mask] - society[mask]
    return (diff * diff / society[mask]).sum(axis=1)


def _penalty_per_agent_float(rows: np.ndarray) -> np.ndarray:
    n = rows.shape[0]
    harmonic = n / (1.0 / rows).sum(axis=0)
    diff = rows - harmonic
    return (diff * diff / rows).sum(axis=1)


# ---------------------------------------------------------------------------
# Exact mirrors, engaged only when a float quantity sits within _TIE_TOL
# of its threshold.


def _normalized_rows_exact(units: np.ndarray) -> list[list[Fraction]]:
    rows = []
    for row in units:
        total = int(row.sum())
        rows.append([Fraction(int(a), total) for a in row])
    return rows


def _chi2_per_agent_exact(rows: list[list[Fraction]]) -> list[Fraction]:
    n, m = len(rows), len(rows[0])
    society = [sum(rows[i][j] for i in range(n)) / n for j in range(m)]
    out = []
    for i in range(n):
        acc = Fraction(0)
        for j in range(m):
            if society[j]:
                diff = rows[i][j] - society[j]
                acc += diff * diff / society[j]
        out.append(acc)
    return out


def _penalty_per_agent_exact(rows: list[list[Fraction]]) -> list[Fraction]:
    n, m = len(rows), len(rows[0])
    harmonic = [n / sum(1 / rows[i][j] for i in range(n)) for j in range(m)]
    out = []
    for i in range(n):
        acc = Fraction(0)
        for j in range(m):
            diff = rows[i][j] - harmonic[j]
            acc += diff * diff / rows[i][j]
        out.append(acc)
    return out


# ---------------------------------------------------------------------------
# Trial evaluation


def _scalar_trial(
    trial: int,
    units: np.ndarray,
    quantity: float,
    threshold: float,
    exact_quantity_fn,
    exact_threshold: Fraction,
) -> TrialResult:
    """Resolve a float comparison, escalating to rationals at a near tie."""
    if abs(quantity - threshold) > _TIE_TOL:
        return TrialResult(trial, quantity >= threshold, quantity, threshold, False)
    exact_q = exact_quantity_fn(units)
    return TrialResult(trial, exact_q >= exact_threshold, float(exact_q), threshold, True)


def _prop_margin_float(units: np.ndarray, kind: str, n: int) -> float:
    rows = _normalized_rows_float(units)
    if kind == "goods":
        threshold = float(_chi2_per_agent_float(rows).min()) / n
    else:
        threshold = float(_penalty_per_agent_float(rows).sum()) / (n * n)
    return threshold - float(rows.max())


def _prop_margin_exact(units: np.ndarray, kind: str, n: int) -> Fraction:
    rows = _normalized_rows_exact(units)
    if kind == "goods":
        threshold = min(_chi2_per_agent_exact(rows)) / n
    else:
        threshold = sum(_penalty_per_agent_exact(rows), Fraction(0)) / (n * n)
    return threshold - max(v for row in rows for v in row)


def _prop_allocation_trial(trial: int, units: np.ndarray, kind: str) -> TrialResult:
    n, m = units.shape
    instance = _units_to_instance(units, kind)
    mechanism = trading_post(instance) if kind == "goods" else inverse_trading_post(instance)

    program = build_prop_lp(instance)
    solution = solve(program)

    # The mechanism's shares are feasible for the LP, so its worst
    # normalized share bounds the optimum from the appropriate side.
    weights = l1_normalized(instance)
    mech_scores = (weights * mechanism.allocation.shares).sum(axis=1)
    if kind == "goods" and solution.objective_value < float(mech_scores.min()) - 1e-6:
        raise InternalInvariantError(
            "share LP optimum fell below the trading-post floor"
        )
    if kind == "chores" and solution.objective_value > float(mech_scores.max()) + 1e-6:
        raise InternalInvariantError(
            "share LP optimum exceeded the inverse-trading-post ceiling"
        )

    shares = np.asarray(solution.variable_values[1:]).reshape(n, m)
    fractional = FractionalAllocation(shares=shares, complete=kind == "chores")
    allocation = round_proportional(instance, fractional)
    outcome = verify(instance, allocation, "PROP")

    # Exact worst relative slack of the proportional-share inequality.
    slack: Optional[Fraction] = None
    for i in range(n):
        own = instance.bundle_value(i, allocation.counts[i])
        total = instance.total_value(i)
        ratio = n * own / total
        margin = ratio - 1 if kind == "goods" else 1 - ratio
        slack = margin if slack is None or margin < slack else slack
    assert slack is not None
    if outcome.holds != (slack >= 0):
        raise InternalInvariantError("verifier and slack computation disagree")
    return TrialResult(trial, outcome.holds, float(slack), 0.0, True)


def _run_trial(config: ExperimentConfig, trial: int) -> TrialResult:
    """Evaluate one trial; separate top-level function so pools can pickle it."""
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, trial]))
    units = _sample_units(rng, config.n, config.m, config.kind)
    n = config.n

    if config.target == "CHI2_BOUND":
        rows = _normalized_rows_float(units)
        quantity = float(_chi2_per_agent_float(rows).min())
        return _scalar_trial(
            trial,
            units,
            quantity,
            (n - 3) / (3 * n),
            lambda u: min(_chi2_per_agent_exact(_normalized_rows_exact(u))),
            Fraction(n - 3, 3 * n),
        )
    if config.target == "CHORES_PENALTY_BOUND":
        rows = _normalized_rows_float(units)
        quantity = float(_penalty_per_agent_float(rows).min())
        return _scalar_trial(
            trial,
            units,
            quantity,
            5 / 16,
            lambda u: min(_penalty_per_agent_exact(_normalized_rows_exact(u))),
            Fraction(5, 16),
        )
    if config.target == "PROP_CONDITION":
        quantity = _prop_margin_float(units, config.kind, n)
        return _scalar_trial(
            trial,
            units,
            quantity,
            0.0,
            lambda u: _prop_margin_exact(u, config.kind, n),
            Fraction(0),
        )
    return _prop_allocation_trial(trial, units, config.kind)


def run_experiment(
    config: ExperimentConfig, workers: Optional[int] = None
) -> ExperimentReport:
    """Run all trials and aggregate; `workers` > 1 fans trials out to processes."""
    if workers is not None and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = tuple(pool.map(_run_trial, repeat(config), range(config.trials)))
    else:
        rows = tuple(_run_trial(config, trial) for trial in range(config.trials))
    return ExperimentReport(config=config, rows=rows)


# ---------------------------------------------------------------------------
# Report formatting


def emit_report(report: ExperimentReport, format: str = "human") -> str:
    if format == "json":
        payload = {
            "schema_version": report.schema_version,
            "config": {
                "n": report.config.n,
                "m": report.config.m,
                "trials": report.config.trials,
                "seed": report.config.seed,
                "kind": report.config.kind,
                "target": report.config.target,
            },
            "successes": report.successes,
            "success_fraction": str(report.success_fraction),
            "min_quantity": report.min_quantity,
            "median_quantity": report.median_quantity,
            "trials_detail": [
                {
                    "trial": row.trial,
                    "success": row.success,
                    "quantity": row.quantity,
                    "threshold": row.threshold,
                    "exact_checked": row.exact_checked,
                }
                for row in report.rows
            ],
        }
        return json.dumps(payload, indent=2) + "\n"

    if format == "csv":
        lines = ["trial,success,quantity,threshold,exact_checked"]
        for row in report.rows:
            lines.append(
                f"{row.trial},{str(row.success).lower()},{row.quantity!r},"
                f"{row.threshold!r},{str(row.exact_checked).lower()}"
            )
        return "\n".join(lines) + "\n"

    if format == "human":
        cfg = report.config
        frac = report.success_fraction
        lines = [
            f"target {cfg.target} ({cfg.kind}), n={cfg.n} m={cfg.m} "
            f"trials={cfg.trials} seed={cfg.seed}",
            f"successes {report.successes}/{cfg.trials} "
            f"(= {frac.numerator}/{frac.denominator} exactly, {float(frac):.4f})",
            f"quantity min {report.min_quantity:.6g} "
            f"median {report.median_quantity:.6g}",
        ]
        for row in report.rows:
            mark = "ok  " if row.success else "FAIL"
            tail = "  [exact]" if row.exact_checked else ""
            lines.append(
                f"  trial {row.trial:4d} {mark} quantity={row.quantity:.6g} "
                f"threshold={row.threshold:.6g}{tail}"
            )
        return "\n".join(lines) + "\n"

    raise InstanceError(f"unknown report format {format!r}")


def parse_report(text: str) -> ExperimentReport:
    """Inverse of the JSON emitter; validates schema and aggregates."""
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON in report: {exc.msg}", f"line {exc.lineno}")
    if not isinstance(payload, dict):
        raise ParseError("report must be a JSON object", "$")
    version = payload.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema_version {version!r}", "$.schema_version")
    try:
        cfg_raw = payload["config"]
        config = ExperimentConfig(
            n=int(cfg_raw["n"]),
            m=int(cfg_raw["m"]),
            trials=int(cfg_raw["trials"]),
            seed=int(cfg_raw["seed"]),
            kind=str(cfg_raw["kind"]),
            target=str(cfg_raw["target"]),
        )
        rows = tuple(
            TrialResult(
                trial=int(entry["trial"]),
                success=bool(entry["success"]),
                quantity=float(entry["quantity"]),
                threshold=float(entry["threshold"]),
                exact_checked=bool(entry["exact_checked"]),
            )
            for entry in payload["trials_detail"]
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed report: {exc}", "$")
    if len(rows) != config.trials:
        raise ParseError("trial rows do not match config.trials", "$.trials_detail")
    report = ExperimentReport(config=config, rows=rows)
    if payload.get("successes") != report.successes:
        raise ParseError("stored successes disagree with trial rows", "$.successes")
    if payload.get("success_fraction") != str(report.success_fraction):
        raise ParseError(
            "stored success_fraction disagrees with trial rows", "$.success_fraction"
        )
    return report
