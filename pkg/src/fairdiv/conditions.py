"""Sufficient existence conditions, copy-count bounds, and inequality checks.

Every public function reports both sides of its inequality and the margin,
not just a boolean, so callers can see how close an instance is to the
threshold.  Copy-count bounds (mu) are rounded up to the next multiple of
the group-size gcd and to at least the block-representability threshold, so
instances built with mu copies per type automatically satisfy the rounding
preconditions.

The dilution slack functions at the bottom are the scalar inequalities the
copy-count analysis rests on; they are exposed so tests can sweep them over
grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .core import Instance, l1_normalized, l2_normalized, thresholds
from .errors import InstanceError, UnsupportedScopeError


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of one condition evaluation.

    ``direction`` is "<=" when the condition holds iff lhs <= threshold and
    ">=" for the opposite reading; ``margin`` is positive exactly when the
    condition holds with room to spare.  ``mu_bound`` is set only by the
    copy-count bounds.  ``details`` echoes the inputs that went into the
    evaluation (n, d, t, g, theta, the pairwise distance or divergence, and
    so on).
    """

    condition: str
    satisfied: bool
    lhs: float
    threshold: float
    direction: str
    mu_bound: Optional[int] = None
    details: dict = field(default_factory=dict)

    @property
    def margin(self) -> float:
        if self.direction == "<=":
            return self.threshold - self.lhs
        return self.lhs - self.threshold


def _base_details(instance: Instance) -> dict:
    th = thresholds(instance.group_sizes)
    return {
        "n": instance.n,
        "d": instance.d,
        "t": instance.t,
        "g": th.g,
        "theta": th.theta,
    }


def _loss_constant(instance: Instance) -> int:
    """Worst-case copies a group's bundle can shift during rounding.

    The rounding trace asserts a slightly larger constant (one extra unit
    per type for fractional-part pooling); the condition thresholds use
    this one.
    """
    d, t, n = instance.d, instance.t, instance.n
    n_d = instance.group_sizes[-1]
    theta = thresholds(instance.group_sizes).theta
    return d * (d - 1) + t * (theta + n + n_d - d - 1)


def _weighted_l2_rows(instance: Instance) -> np.ndarray:
    return l2_normalized(instance)


def _weighted_l1_rows(instance: Instance) -> np.ndarray:
    return l1_normalized(instance)


def _min_sq_distance(instance: Instance) -> float:
    """Smallest copy-weighted squared l2 distance between normalized rows."""
    rows = _weighted_l2_rows(instance)
    k = np.asarray(instance.type_copies, dtype=np.float64)
    best = math.inf
    for i in range(instance.d):
        for j in range(i + 1, instance.d):
            diff = rows[i] - rows[j]
            best = min(best, float(np.dot(k, diff * diff)))
    return best


def _min_kl(instance: Instance) -> float:
    """Smallest copy-weighted KL divergence over ordered row pairs."""
    rows = _weighted_l1_rows(instance)
    k = np.asarray(instance.type_copies, dtype=np.float64)
    best = math.inf
    for i in range(instance.d):
        for j in range(instance.d):
            if i == j:
                continue
            p, q = rows[i], rows[j]
            best = min(best, float(np.sum(k * p * np.log(p / q))))
    return best


def _round_up_mu(raw: float, instance: Instance) -> int:
    th = thresholds(instance.group_sizes)
    mu = max(math.ceil(raw), th.theta, 1)
    return -(-mu // th.g) * th.g


def ef_condition_goods(instance: Instance) -> ConditionReport:
    """Check the dissimilarity condition for envy-free goods allocations.

    Satisfied when the largest normalized per-copy value is at most
    sqrt(min pairwise squared distance / (2n(d(d-1)+t(theta+n+n_d-d-1)))),
    all quantities copy-weighted and l2-normalized.  With a single group
    the condition is vacuous and reported satisfied at infinite threshold.
    """
    if instance.kind != "goods":
        raise UnsupportedScopeError("ef_condition_goods requires a goods instance")
    details = _base_details(instance)
    rows = _weighted_l2_rows(instance)
    lhs = float(rows.max())
    if instance.d == 1:
        return ConditionReport(
            condition="ef-goods",
            satisfied=True,
            lhs=lhs,
            threshold=math.inf,
            direction="<=",
            details={**details, "vacuous": True},
        )
    lam = 2 * instance.n * _loss_constant(instance)
    min_sq = _min_sq_distance(instance)
    threshold = math.sqrt(min_sq / lam)
    details.update(
        {
            "min_sq_distance": min_sq,
            "denominator": lam,
            "copies_ok": _copies_ok(instance),
        }
    )
    return ConditionReport(
        condition="ef-goods",
        satisfied=lhs <= threshold,
        lhs=lhs,
        threshold=threshold,
        direction="<=",
        details=details,
    )


def ef_condition_chores(instance: Instance) -> ConditionReport:
    """Check the divergence condition for envy-free chores allocations.

    Satisfied when the largest normalized per-copy cost is at most
    minKL / (2n(d(d-1)+t(theta+n+n_d-d-1)) * ln(1/cmin)), where minKL is
    the smallest copy-weighted KL divergence between normalized cost rows
    and cmin the smallest normalized per-copy cost.
    """
    if instance.kind != "chores":
        raise UnsupportedScopeError("ef_condition_chores requires a chores instance")
    if instance.m < 2:
        raise UnsupportedScopeError("the chores condition needs at least two copies overall")
    details = _base_details(instance)
    rows = _weighted_l1_rows(instance)
    lhs = float(rows.max())
    if instance.d == 1:
        return ConditionReport(
            condition="ef-chores",
            satisfied=True,
            lhs=lhs,
            threshold=math.inf,
            direction="<=",
            details={**details, "vacuous": True},
        )
    lam = 2 * instance.n * _loss_constant(instance)
    min_kl = _min_kl(instance)
    log_inv_cmin = -math.log(float(rows.min()))
    threshold = min_kl / (lam * log_inv_cmin) if min_kl > 0 else 0.0
    details.update(
        {
            "min_kl": min_kl,
            "denominator": lam,
            "log_inverse_min_cost": log_inv_cmin,
            "copies_ok": _copies_ok(instance),
        }
    )
    return ConditionReport(
        condition="ef-chores",
        satisfied=lhs <= threshold,
        lhs=lhs,
        threshold=threshold,
        direction="<=",
        details=details,
    )


def _copies_ok(instance: Instance) -> bool:
    th = thresholds(instance.group_sizes)
    return all(k >= th.theta and k % th.g == 0 for k in instance.type_copies)


def _mu_report(
    condition: str, instance: Instance, raw: Optional[float], details: dict
) -> ConditionReport:
    """Wrap a raw copy-count bound; None means no finite bound exists."""
    th = thresholds(instance.group_sizes)
    lhs = float(min(instance.type_copies))
    if raw is None or not math.isfinite(raw):
        details["unbounded"] = True
        return ConditionReport(
            condition=condition,
            satisfied=False,
            lhs=lhs,
            threshold=math.inf,
            direction=">=",
            details=details,
        )
    mu = _round_up_mu(raw, instance)
    details["raw_bound"] = raw
    satisfied = all(
        k >= mu and k % th.g == 0 for k in instance.type_copies
    )
    return ConditionReport(
        condition=condition,
        satisfied=satisfied,
        lhs=lhs,
        threshold=float(mu),
        direction=">=",
        mu_bound=mu,
        details=details,
    )


def mu_bound_goods(instance: Instance) -> ConditionReport:
    """Copies per type that guarantee an envy-free goods allocation exists.

    The bound is 2n(d^2 + t(theta+n+n_d-d-1)) over the smallest pairwise
    squared distance of l2-normalized value rows at one copy per type,
    rounded up to a multiple of g and to at least theta.  Groups with
    identical normalized rows admit no finite bound.
    """
    if instance.kind != "goods":
        raise UnsupportedScopeError("mu_bound_goods requires a goods instance")
    details = _base_details(instance)
    if instance.d == 1:
        return _mu_report("ef-goods-copies", instance, 1.0, {**details, "vacuous": True})
    unit = instance.unit_copies()
    min_sq = _min_sq_distance(unit)
    details["min_sq_distance"] = min_sq
    d, t, n = instance.d, instance.t, instance.n
    n_d = instance.group_sizes[-1]
    theta = thresholds(instance.group_sizes).theta
    numerator = 2 * n * (d * d + t * (theta + n + n_d - d - 1))
    details["numerator"] = numerator
    raw = numerator / min_sq if min_sq > 0 else None
    return _mu_report("ef-goods-copies", instance, raw, details)


def mu_bound_chores(instance: Instance) -> ConditionReport:
    """Copies per type that guarantee an envy-free chores allocation exists.

    With lam = 2n(d(d-1)+t(theta+n+n_d-d-1)), the bound is
    2(n + (2.5n+lam-1) ln(1/cmin) + lam(ln(2*lam/minKL)-1)) / minKL, all
    quantities at one copy per type.  The logarithmic term can go negative
    when minKL exceeds 2*lam; the report flags that case but uses the
    formula as stated.
    """
    if instance.kind != "chores":
        raise UnsupportedScopeError("mu_bound_chores requires a chores instance")
    if instance.m < 2:
        raise UnsupportedScopeError("the chores bound needs at least two copies overall")
    details = _base_details(instance)
    if instance.d == 1:
        return _mu_report("ef-chores-copies", instance, 1.0, {**details, "vacuous": True})
    unit = instance.unit_copies()
    min_kl = _min_kl(unit)
    details["min_kl"] = min_kl
    if min_kl <= 0:
        return _mu_report("ef-chores-copies", instance, None, details)
    n = instance.n
    lam = 2 * n * _loss_constant(instance)
    log_inv_cmin = -math.log(float(_weighted_l1_rows(unit).min()))
    log_term = math.log(2 * lam / min_kl) - 1
    details.update(
        {
            "lambda": lam,
            "log_inverse_min_cost": log_inv_cmin,
            "log_term_negative": math.log(2 * lam / min_kl) < 0,
        }
    )
    raw = 2 * (n + (2.5 * n + lam - 1) * log_inv_cmin + lam * log_term) / min_kl
    return _mu_report("ef-chores-copies", instance, raw, details)


def _require_per_item_scope(instance: Instance, what: str) -> None:
    if any(s != 1 for s in instance.group_sizes) or any(
        k != 1 for k in instance.type_copies
    ):
        raise UnsupportedScopeError(
            f"{what} is defined for single-agent groups with one copy per type"
        )


def prop_condition(instance: Instance) -> ConditionReport:
    """Check the distance-from-society condition for proportionality.

    Goods: every agent's chi-squared divergence from the average normalized
    valuation must be at least n times the largest normalized value.
    Chores: the summed squared deviation of normalized costs from their
    per-item harmonic mean, over n^2, must dominate the largest normalized
    cost.  Strict inequality upgrades the guarantee to strictly better than
    the proportional share everywhere.
    """
    _require_per_item_scope(instance, "prop_condition")
    details = _base_details(instance)
    rows = _weighted_l1_rows(instance)
    n = instance.d
    lhs = float(rows.max())
    if instance.kind == "goods":
        society = rows.mean(axis=0)
        d_star = math.inf
        for i in range(n):
            p = rows[i]
            mask = society > 0
            d_star = min(
                d_star,
                float(np.sum((p[mask] - society[mask]) ** 2 / society[mask])),
            )
        threshold = d_star / n
        details["d_star"] = d_star
        condition = "prop-goods"
    else:
        harmonic = n / np.sum(1.0 / rows, axis=0)
        penalty = float(np.sum((rows - harmonic) ** 2 / rows))
        threshold = penalty / (n * n)
        details["penalty"] = penalty
        condition = "prop-chores"
    satisfied = lhs <= threshold
    details["strict"] = lhs < threshold
    return ConditionReport(
        condition=condition,
        satisfied=satisfied,
        lhs=lhs,
        threshold=threshold,
        direction="<=",
        details=details,
    )


def tefx_condition(instance: Instance) -> ConditionReport:
    """Check the similarity condition for transfer-stable envy-freeness.

    Satisfied when the smallest normalized value is at least eight times
    the largest pairwise total-variation distance between normalized value
    rows; near-identical agents pass easily.
    """
    if instance.kind != "goods":
        raise UnsupportedScopeError("tefx_condition requires a goods instance")
    _require_per_item_scope(instance, "tefx_condition")
    details = _base_details(instance)
    rows = _weighted_l1_rows(instance)
    lhs = float(rows.min())
    max_tv = 0.0
    for i in range(instance.d):
        for j in range(i + 1, instance.d):
            max_tv = max(max_tv, 0.5 * float(np.abs(rows[i] - rows[j]).sum()))
    threshold = 8.0 * max_tv
    details["max_tv"] = max_tv
    return ConditionReport(
        condition="tefx",
        satisfied=lhs >= threshold,
        lhs=lhs,
        threshold=threshold,
        direction=">=",
        details=details,
    )


# ---------------------------------------------------------------------------
# Cake discretization budget


@dataclass(frozen=True)
class DiscretizationPlan:
    """Piece width and query budget for cutting a unit cake into equal pieces.

    ``epsilon`` is exactly 1/pieces; ``raw_epsilon`` is the width the
    analysis allows before rounding down to an integral piece count.
    """

    epsilon: Fraction
    pieces: int
    query_budget: int
    raw_epsilon: float
    density_bound: float


def cake_epsilon(n: int, lipschitz_k: float, delta: float) -> DiscretizationPlan:
    """Piece width fine enough for a strongly envy-free contiguous split.

    Width = min(1/k, (sqrt((3.5k)^2 + 16 n^3 M^2 delta) - 3.5k)/(4 n^3 M^2))
    with M = max((8k)^(1/3), 2), rounded down so the piece count 1/width is
    integral; the value-query budget is n pieces' worth of evaluations.
    """
    if n < 2:
        raise InstanceError("cake cutting needs at least two agents")
    k = float(lipschitz_k)
    dlt = float(delta)
    if k <= 0 or dlt <= 0:
        raise InstanceError("the smoothness constant and separation must be positive")
    M = max((8.0 * k) ** (1.0 / 3.0), 2.0)
    quad = 4.0 * n**3 * M * M
    raw = min(1.0 / k, (math.sqrt((3.5 * k) ** 2 + 4.0 * quad * dlt) - 3.5 * k) / quad)
    pieces = max(math.ceil(1.0 / raw - 1e-12), 1)
    return DiscretizationPlan(
        epsilon=Fraction(1, pieces),
        pieces=pieces,
        query_budget=n * pieces,
        raw_epsilon=raw,
        density_bound=M,
    )


# ---------------------------------------------------------------------------
# Scalar inequalities behind the copy-count bounds


def dilution_slack_squared(x: float, a: float, b: float) -> float:
    """Slack of x(sqrt(x/(x+a))b - (1-sqrt(x/(x+a))))^2 >= b^2 x - a(b+1).

    Provably nonnegative for a >= 0, 0 <= b <= 1, x >= a(b+1)/(2b); for
    1 < b <= 2 it additionally needs x <= a(b+1)/(4(b-1)) (the bound can go
    negative for larger x, e.g. at x=1.5, a=0.5, b=2).  A nonnegative
    return value confirms the inequality at this point.
    """
    r = math.sqrt(x / (x + a))
    lhs = x * (r * b - (1.0 - r)) ** 2
    rhs = b * b * x - a * (b + 1.0)
    return lhs - rhs


def dilution_slack_log(x: float, a: float, b: float, c: float) -> float:
    """Slack of the logarithmic analogue used for cost divergences.

    Checks x((x/(x+a))b - ln((x+a)/x)) - c ln(x+a) against
    (b/2)x - (a(1.5b+1) + c(ln(2c/b) - 1)) for x, a, b, c >= 0 (x, b > 0).
    """
    lhs = x * ((x / (x + a)) * b - math.log((x + a) / x)) - c * math.log(x + a)
    tail = c * (math.log(2.0 * c / b) - 1.0) if c > 0 else 0.0
    rhs = 0.5 * b * x - (a * (1.5 * b + 1.0) + tail)
    return lhs - rhs


def copies_slack_goods(
    instance: Instance,
    alpha: Optional[int] = None,
    beta: Optional[int] = None,
) -> float:
    """Worst-pair slack of the copy-dilution bound on normalized distances.

    For copy counts within [alpha, beta], the copy-weighted distance of
    normalized rows is at least sqrt(alpha/beta) times the unit-copy
    distance minus (1 - sqrt(alpha/beta)).  Returns the minimum lhs - rhs
    over group pairs (inf when there is only one group).
    """
    alpha = min(instance.type_copies) if alpha is None else alpha
    beta = max(instance.type_copies) if beta is None else beta
    if not all(alpha <= k <= beta for k in instance.type_copies):
        raise InstanceError("copy counts fall outside [alpha, beta]")
    unit = instance.unit_copies()
    k = np.asarray(instance.type_copies, dtype=np.float64)
    rows_k = _weighted_l2_rows(instance)
    rows_1 = _weighted_l2_rows(unit)
    ratio = math.sqrt(alpha / beta)
    best = math.inf
    for i in range(instance.d):
        for j in range(i + 1, instance.d):
            diff_k = rows_k[i] - rows_k[j]
            lhs = math.sqrt(float(np.dot(k, diff_k * diff_k)))
            diff_1 = rows_1[i] - rows_1[j]
            rhs = ratio * math.sqrt(float(np.dot(diff_1, diff_1))) - (1.0 - ratio)
            best = min(best, lhs - rhs)
    return best


def copies_slack_chores(
    instance: Instance,
    alpha: Optional[int] = None,
    beta: Optional[int] = None,
) -> float:
    """Worst-pair slack of the copy-dilution bound on cost divergences.

    For copy counts within [alpha, beta], the copy-weighted KL divergence
    of normalized cost rows is at least (alpha/beta) times the unit-copy
    divergence minus (ln(beta/alpha) + ((beta-alpha)/alpha) ln(1/cmin)).
    Returns the minimum lhs - rhs over ordered pairs.
    """
    alpha = min(instance.type_copies) if alpha is None else alpha
    beta = max(instance.type_copies) if beta is None else beta
    if not all(alpha <= k <= beta for k in instance.type_copies):
        raise InstanceError("copy counts fall outside [alpha, beta]")
    unit = instance.unit_copies()
    k = np.asarray(instance.type_copies, dtype=np.float64)
    rows_k = _weighted_l1_rows(instance)
    rows_1 = _weighted_l1_rows(unit)
    log_inv_cmin = -math.log(float(rows_1.min()))
    drop = math.log(beta / alpha) + ((beta - alpha) / alpha) * log_inv_cmin
    best = math.inf
    for i in range(instance.d):
        for j in range(instance.d):
            if i == j:
                continue
            lhs = float(np.sum(k * rows_k[i] * np.log(rows_k[i] / rows_k[j])))
            rhs = (alpha / beta) * float(
                np.sum(rows_1[i] * np.log(rows_1[i] / rows_1[j]))
            ) - drop
            best = min(best, lhs - rhs)
    return best
