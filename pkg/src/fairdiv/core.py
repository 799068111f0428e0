"""Instance model, normalizations, divergences, and exact fairness verifiers.

Values are exact rationals throughout.  Verification (envy-freeness,
proportionality, transfer stability) is done in rational arithmetic with no
tolerance.  Square roots and logarithms only appear in derived float
quantities (norms, divergences), computed in 64-bit floats.

Conventions used by every module downstream:

* groups are sorted ascending by size at construction;
* ``values[i][z]`` is the per-copy value (or cost) group ``i`` assigns to
  item type ``z``;
* fractional shares count copies per agent, so feasibility reads
  ``sum_i n_i * x[i][z] <= k_z``;
* integral allocations give every agent of a group the same bundle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Literal, Optional, Sequence, Union

import numpy as np

from .errors import (
    DegenerateAgentError,
    DivergenceUndefinedError,
    InstanceError,
    UnsupportedScopeError,
)

Kind = Literal["goods", "chores"]
Notion = Literal["EF", "STRONG_EF", "PROP", "STRONG_PROP", "TEFX"]

NOTIONS: tuple[str, ...] = ("EF", "STRONG_EF", "PROP", "STRONG_PROP", "TEFX")


def _as_fraction(value: Union[Fraction, int, str]) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    raise InstanceError(f"value {value!r} is not an exact rational")


@dataclass(frozen=True)
class Instance:
    """A fair-division instance over item types with multiplicities.

    ``group_sizes`` lists the number of agents per group; all agents of a
    group share the valuation row and receive identical bundles.  The
    constructor sorts groups ascending by size (stable) and permutes the
    value rows to match, so downstream indices always refer to the sorted
    order.
    """

    group_sizes: tuple[int, ...]
    type_copies: tuple[int, ...]
    values: tuple[tuple[Fraction, ...], ...]
    kind: Kind

    def __init__(
        self,
        group_sizes: Sequence[int],
        type_copies: Sequence[int],
        values: Sequence[Sequence[Union[Fraction, int, str]]],
        kind: Kind,
    ):
        if kind not in ("goods", "chores"):
            raise InstanceError(f"kind must be 'goods' or 'chores', got {kind!r}")
        sizes = [int(s) for s in group_sizes]
        copies = [int(c) for c in type_copies]
        if not sizes:
            raise InstanceError("at least one group is required")
        if not copies:
            raise InstanceError("at least one item type is required")
        if any(s < 1 for s in sizes):
            raise InstanceError("group sizes must be positive integers")
        if any(c < 1 for c in copies):
            raise InstanceError("copy counts must be positive integers")
        if len(values) != len(sizes):
            raise InstanceError(
                f"expected {len(sizes)} value rows, got {len(values)}"
            )
        rows = []
        for i, row in enumerate(values):
            if len(row) != len(copies):
                raise InstanceError(
                    f"value row {i} has {len(row)} entries, expected {len(copies)}"
                )
            rows.append(tuple(_as_fraction(v) for v in row))

        # Stable sort by group size; value rows travel with their group.
        order = sorted(range(len(sizes)), key=lambda i: sizes[i])
        sizes = [sizes[i] for i in order]
        rows = [rows[i] for i in order]

        for i, row in enumerate(rows):
            if any(v < 0 for v in row):
                raise InstanceError(f"group {i} has a negative value")
            if kind == "goods" and all(v == 0 for v in row):
                raise DegenerateAgentError(f"group {i} values every type at zero")
            if kind == "chores" and any(v == 0 for v in row):
                raise InstanceError(f"group {i} has a zero cost; chores must be positive")

        object.__setattr__(self, "group_sizes", tuple(sizes))
        object.__setattr__(self, "type_copies", tuple(copies))
        object.__setattr__(self, "values", tuple(rows))
        object.__setattr__(self, "kind", kind)

    @property
    def d(self) -> int:
        return len(self.group_sizes)

    @property
    def t(self) -> int:
        return len(self.type_copies)

    @property
    def n(self) -> int:
        return sum(self.group_sizes)

    @property
    def m(self) -> int:
        return sum(self.type_copies)

    def values_array(self) -> np.ndarray:
        """Value matrix as float64, shape (d, t)."""
        return np.array([[float(v) for v in row] for row in self.values], dtype=np.float64)

    def copies_array(self) -> np.ndarray:
        return np.array(self.type_copies, dtype=np.float64)

    def bundle_value(self, group: int, counts: Sequence[int]) -> Fraction:
        """Exact per-agent value of a bundle given as per-type counts."""
        row = self.values[group]
        return sum((row[z] * int(c) for z, c in enumerate(counts) if c), Fraction(0))

    def total_value(self, group: int) -> Fraction:
        """Exact value the group assigns to the whole supply (memoized)."""
        cache = self.__dict__.setdefault("_total_cache", {})
        if group not in cache:
            cache[group] = self.bundle_value(group, self.type_copies)
        return cache[group]

    def unit_copies(self) -> "Instance":
        """The same valuation profile with a single copy of every type."""
        return Instance(self.group_sizes, (1,) * self.t, self.values, self.kind)


@dataclass
class FractionalAllocation:
    """Per-agent fractional copy counts, shape (d, t) float64.

    ``complete`` records whether the producer guarantees
    ``sum_i n_i * shares[i][z] == k_z`` exactly (up to float representation).
    """

    shares: np.ndarray
    complete: bool = False

    def copy(self) -> "FractionalAllocation":
        return FractionalAllocation(self.shares.copy(), self.complete)


@dataclass(frozen=True)
class IntegralAllocation:
    """Per-agent integer copy counts; every agent of group i holds row i."""

    counts: tuple[tuple[int, ...], ...]

    def __init__(self, counts: Sequence[Sequence[int]]):
        rows = []
        for row in counts:
            fixed = []
            for c in row:
                ci = int(c)
                if ci != c or ci < 0:
                    raise InstanceError(f"allocation count {c!r} is not a nonnegative integer")
                fixed.append(ci)
            rows.append(tuple(fixed))
        object.__setattr__(self, "counts", tuple(rows))

    def array(self) -> np.ndarray:
        return np.array(self.counts, dtype=np.int64)


def _check_allocation_shape(instance: Instance, counts: Sequence[Sequence[int]]) -> None:
    if len(counts) != instance.d:
        raise InstanceError(
            f"allocation has {len(counts)} groups, instance has {instance.d}"
        )
    for i, row in enumerate(counts):
        if len(row) != instance.t:
            raise InstanceError(
                f"allocation row {i} has {len(row)} types, instance has {instance.t}"
            )


def allocation_supply(instance: Instance, allocation: IntegralAllocation) -> tuple[int, ...]:
    """Copies of each type handed out, counting every agent of every group."""
    _check_allocation_shape(instance, allocation.counts)
    return tuple(
        sum(instance.group_sizes[i] * allocation.counts[i][z] for i in range(instance.d))
        for z in range(instance.t)
    )


def is_complete(instance: Instance, allocation: IntegralAllocation) -> bool:
    return allocation_supply(instance, allocation) == instance.type_copies


# ---------------------------------------------------------------------------
# Normalizations


def l1_norm(instance: Instance, group: int) -> Fraction:
    """Copy-weighted L1 norm of a value row (exact)."""
    row = instance.values[group]
    return sum(
        (Fraction(k) * v for k, v in zip(instance.type_copies, row)), Fraction(0)
    )


def l2_norm_squared(instance: Instance, group: int) -> Fraction:
    """Copy-weighted squared L2 norm of a value row (exact)."""
    row = instance.values[group]
    return sum(
        (Fraction(k) * v * v for k, v in zip(instance.type_copies, row)), Fraction(0)
    )


def normalize(instance: Instance, group: int, norm: Literal["L1", "L2"]) -> np.ndarray:
    """Per-type normalized values for one group, as float64.

    L1 divides by the copy-weighted sum; L2 by the copy-weighted Euclidean
    norm.  Chores only admit the L1 normalization.
    """
    if not 0 <= group < instance.d:
        raise InstanceError(f"group index {group} out of range")
    if norm not in ("L1", "L2"):
        raise UnsupportedScopeError(f"unknown norm {norm!r}")
    if instance.kind == "chores" and norm == "L2":
        raise UnsupportedScopeError("chores instances only use the L1 normalization")
    row = np.array([float(v) for v in instance.values[group]])
    if norm == "L1":
        denom = float(l1_norm(instance, group))
    else:
        denom = math.sqrt(float(l2_norm_squared(instance, group)))
    if denom == 0.0:
        raise DegenerateAgentError(f"group {group} has an all-zero value row")
    return row / denom


def _cached_rows(instance: Instance, key: str, norm: Literal["L1", "L2"]) -> np.ndarray:
    # Memoized on the instance: several consumers (mechanisms, LPs,
    # condition checks) want the same matrix and the exact row sums
    # backing it are the expensive part at large t.
    cached = instance.__dict__.get(key)
    if cached is None:
        cached = np.vstack([normalize(instance, i, norm) for i in range(instance.d)])
        cached.setflags(write=False)
        instance.__dict__[key] = cached
    return cached


def l1_normalized(instance: Instance) -> np.ndarray:
    """All rows L1-normalized with copy weights, shape (d, t). Read-only."""
    return _cached_rows(instance, "_l1_rows", "L1")


def l2_normalized(instance: Instance) -> np.ndarray:
    """All rows L2-normalized with copy weights, shape (d, t). Read-only.

    Goods only.
    """
    return _cached_rows(instance, "_l2_rows", "L2")


# ---------------------------------------------------------------------------
# Divergences

DivergenceKind = Literal["CHI2", "KL", "TV"]


def divergence(kind: DivergenceKind, p: Sequence, q: Sequence) -> float:
    """f-divergence between two finite distributions.

    CHI2 is sum (p-q)^2/q, KL is sum p*ln(p/q) with the 0*ln(0/q)=0
    convention, TV is half the L1 distance.  Both inputs must be
    nonnegative and sum to 1 within 1e-9; a zero q-coordinate carrying
    positive p mass makes CHI2 and KL undefined.
    """
    if kind not in ("CHI2", "KL", "TV"):
        raise DivergenceUndefinedError(f"unknown divergence {kind!r}")
    pv = [float(x) for x in p]
    qv = [float(x) for x in q]
    if len(pv) != len(qv):
        raise DivergenceUndefinedError("distributions have different lengths")
    if any(x < 0 for x in pv) or any(x < 0 for x in qv):
        raise DivergenceUndefinedError("distributions must be nonnegative")
    for name, vec in (("P", pv), ("Q", qv)):
        if abs(sum(vec) - 1.0) > 1e-9:
            raise DivergenceUndefinedError(f"{name} does not sum to 1 (got {sum(vec)!r})")

    if kind == "TV":
        return 0.5 * sum(abs(a - b) for a, b in zip(pv, qv))

    total = 0.0
    for a, b in zip(pv, qv):
        if b == 0.0:
            if a == 0.0:
                continue
            raise DivergenceUndefinedError(
                "support violation: Q has a zero coordinate with positive P mass"
            )
        if kind == "CHI2":
            diff = a - b
            total += diff * diff / b
        else:  # KL
            if a == 0.0:
                continue
            total += a * math.log(a / b)
    return total


# ---------------------------------------------------------------------------
# Numeric thresholds on group sizes


@dataclass(frozen=True)
class Thresholds:
    g: int
    theta: int


def thresholds(group_sizes: Sequence[int]) -> Thresholds:
    """gcd of the group sizes and the representability threshold.

    Every integer that is at least theta and divisible by g can be written
    as a nonnegative integer combination of the sizes (see frobenius).
    """
    sizes = sorted(int(s) for s in group_sizes)
    if not sizes or any(s < 1 for s in sizes):
        raise InstanceError("group sizes must be positive integers")
    g = math.gcd(*sizes) if len(sizes) > 1 else sizes[0]
    theta = g * (sizes[0] // g - 1) * (sizes[-1] // g - 1)
    return Thresholds(g=g, theta=theta)


# ---------------------------------------------------------------------------
# Gap reports


@dataclass
class GapReport:
    """Pairwise envy gaps.

    For goods, entry (i, j) is v_i(A_i) - v_i(A_j); for chores it is
    c_i(A_j) - c_i(A_i).  Either way, envy-freeness is equivalent to every
    off-diagonal entry being nonnegative.  Entries are exact Fractions for
    integral allocations and floats for fractional ones.  ``min_gap`` is the
    minimum off-diagonal entry, or None for a single group.
    """

    kind: Literal["goods-gap", "chores-gap"]
    pair_gaps: list
    min_gap: Optional[Union[Fraction, float]]
    exact: bool


def _pairwise_gaps_exact(instance: Instance, rows: Sequence[Sequence[Fraction]]) -> list:
    """rows[i][z]: per-agent holdings of group i (exact). Returns gap matrix."""
    d = instance.d
    sign = 1 if instance.kind == "goods" else -1
    bundle_values = [
        [
            sum((instance.values[i][z] * rows[j][z] for z in range(instance.t)), Fraction(0))
            for j in range(d)
        ]
        for i in range(d)
    ]
    return [
        [sign * (bundle_values[i][i] - bundle_values[i][j]) for j in range(d)]
        for i in range(d)
    ]


def gap_report(
    instance: Instance,
    allocation: Union[IntegralAllocation, FractionalAllocation],
) -> GapReport:
    """Exact pairwise gap matrix for integral allocations, float for fractional."""
    kind = "goods-gap" if instance.kind == "goods" else "chores-gap"
    if isinstance(allocation, IntegralAllocation):
        _check_allocation_shape(instance, allocation.counts)
        supply = allocation_supply(instance, allocation)
        if any(s > k for s, k in zip(supply, instance.type_copies)):
            raise InstanceError("allocation hands out more copies than exist")
        rows = [[Fraction(c) for c in row] for row in allocation.counts]
        gaps = _pairwise_gaps_exact(instance, rows)
        exact = True
    elif isinstance(allocation, FractionalAllocation):
        shares = np.asarray(allocation.shares, dtype=np.float64)
        if shares.shape != (instance.d, instance.t):
            raise InstanceError(
                f"share matrix has shape {shares.shape}, expected {(instance.d, instance.t)}"
            )
        values = instance.values_array()
        bundle_values = values @ shares.T  # (i, j): v_i of group j's per-agent bundle
        own = np.diag(bundle_values)
        sign = 1.0 if instance.kind == "goods" else -1.0
        matrix = sign * (own[:, None] - bundle_values)
        gaps = [[matrix[i, j] for j in range(instance.d)] for i in range(instance.d)]
        exact = False
    else:
        raise InstanceError(f"unsupported allocation type {type(allocation)!r}")

    if instance.d == 1:
        min_gap: Optional[Union[Fraction, float]] = None
    else:
        min_gap = min(
            gaps[i][j] for i in range(instance.d) for j in range(instance.d) if i != j
        )
    return GapReport(kind=kind, pair_gaps=gaps, min_gap=min_gap, exact=exact)


# ---------------------------------------------------------------------------
# Exact verification


@dataclass(frozen=True)
class Witness:
    """First violation found: the envying group, the envied group, and
    (for transfer checks) the 0-based item type whose transfer fails."""

    group: int
    other: int
    item_type: Optional[int] = None


@dataclass(frozen=True)
class VerifyResult:
    notion: str
    holds: bool
    witness: Optional[Witness] = None


def verify(instance: Instance, allocation: IntegralAllocation, notion: Notion) -> VerifyResult:
    """Exact rational check of a fairness notion on a complete allocation.

    EF/STRONG_EF compare per-agent bundle values pairwise across groups.
    PROP/STRONG_PROP compare each agent's bundle to a 1/n share of the
    whole supply.  TEFX (goods only) requires that transferring any single
    item from the envied bundle to the envious agent reverses the envy.
    """
    if notion not in NOTIONS:
        raise UnsupportedScopeError(f"unknown notion {notion!r}")
    _check_allocation_shape(instance, allocation.counts)
    if not is_complete(instance, allocation):
        raise InstanceError("verification requires a complete allocation")
    if notion == "TEFX" and instance.kind != "goods":
        raise UnsupportedScopeError("TEFX is defined for goods instances only")

    d = instance.d
    values = instance.values
    goods = instance.kind == "goods"

    if notion in ("PROP", "STRONG_PROP"):
        # Only diagonal bundles are needed; keep this cheap at large scale.
        strict = notion == "STRONG_PROP"
        n = instance.n
        for i in range(d):
            share = instance.total_value(i) / n
            own = instance.bundle_value(i, allocation.counts[i])
            ok = own >= share if goods else own <= share
            if strict:
                ok = own > share if goods else own < share
            if not ok:
                return VerifyResult(notion, False, Witness(i, i))
        return VerifyResult(notion, True)

    bundle = [
        [instance.bundle_value(i, allocation.counts[j]) for j in range(d)]
        for i in range(d)
    ]

    if notion in ("EF", "STRONG_EF"):
        strict = notion == "STRONG_EF"
        for i in range(d):
            for j in range(d):
                if i == j:
                    continue
                gap = bundle[i][i] - bundle[i][j] if goods else bundle[i][j] - bundle[i][i]
                if gap < 0 or (strict and gap == 0):
                    return VerifyResult(notion, False, Witness(i, j))
        return VerifyResult(notion, True)

    # TEFX: transferring any one item j from A_j to A_i must leave
    # v_i(A_i) + v_{i,j} >= v_i(A_j) - v_{i,j}.
    for i in range(d):
        for j in range(d):
            if i == j:
                continue
            for z in range(instance.t):
                if allocation.counts[j][z] == 0:
                    continue
                v = values[i][z]
                if bundle[i][i] + v < bundle[i][j] - v:
                    return VerifyResult(notion, False, Witness(i, j, z))
    return VerifyResult(notion, True)


def efx_holds(instance: Instance, allocation: IntegralAllocation) -> VerifyResult:
    """Exact EFX check for goods: removing any single item from an envied
    bundle must kill the envy."""
    if instance.kind != "goods":
        raise UnsupportedScopeError("EFX check is defined for goods instances only")
    _check_allocation_shape(instance, allocation.counts)
    d = instance.d
    bundle = [
        [instance.bundle_value(i, allocation.counts[j]) for j in range(d)]
        for i in range(d)
    ]
    for i in range(d):
        for j in range(d):
            if i == j:
                continue
            for z in range(instance.t):
                if allocation.counts[j][z] == 0:
                    continue
                if bundle[i][i] < bundle[i][j] - instance.values[i][z]:
                    return VerifyResult("EFX", False, Witness(i, j, z))
    return VerifyResult("EFX", True)
