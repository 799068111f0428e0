"""Nonnegative integer representations of a total by the group sizes.

decompose(sizes, k) finds coefficients x with sum x_i * sizes_i == k, or
None when no representation exists.  Among all representations it returns
the lexicographically smallest coefficient vector (compare x_1 first, then
x_2, ...), which keeps every caller deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import InstanceError


@dataclass(frozen=True)
class Decomposition:
    coefficients: tuple[int, ...]

    def total(self, sizes: Sequence[int]) -> int:
        return sum(x * s for x, s in zip(self.coefficients, sizes))


def _validate(group_sizes: Sequence[int], k: int) -> list[int]:
    sizes = [int(s) for s in group_sizes]
    if not sizes or any(s < 1 for s in sizes):
        raise InstanceError("group sizes must be positive integers")
    if int(k) != k or k < 0:
        raise InstanceError(f"target {k!r} must be a nonnegative integer")
    return sizes


def decompose(group_sizes: Sequence[int], k: int) -> Optional[Decomposition]:
    """Lexicographically smallest x >= 0 with sum x_i * sizes_i == k, if any."""
    sizes = _validate(group_sizes, k)
    k = int(k)
    d = len(sizes)

    # reach[s][v] says whether v is representable using sizes[s:].  The
    # classic unbounded-coin recurrence fills each suffix table in O(k).
    reach = [None] * (d + 1)
    last = bytearray(k + 1)
    last[0] = 1
    reach[d] = last
    for s in range(d - 1, -1, -1):
        table = bytearray(reach[s + 1])
        step = sizes[s]
        for v in range(step, k + 1):
            if table[v - step]:
                table[v] = 1
        reach[s] = table

    if not reach[0][k]:
        return None

    coeffs = []
    remaining = k
    for s in range(d):
        step = sizes[s]
        x = 0
        # Smallest coefficient first; the suffix table certifies the rest.
        while x * step <= remaining and not reach[s + 1][remaining - x * step]:
            x += 1
        if x * step > remaining:  # pragma: no cover - contradicts reach[s]
            raise AssertionError("suffix table inconsistent")
        coeffs.append(x)
        remaining -= x * step
    assert remaining == 0
    return Decomposition(tuple(coeffs))


def is_representable(group_sizes: Sequence[int], k: int) -> bool:
    return decompose(group_sizes, k) is not None
