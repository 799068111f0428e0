"""Greedy one-item-at-a-time allocation driven by the first agent's values.

Items are handed out in descending order of the first agent's value, each
to whichever bundle the first agent currently values least.  For agents
whose normalized valuations are close in total variation this yields an
allocation where transferring any single envied item removes envy; for
identical agents it is exactly envy-free up to any item.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .core import Instance, IntegralAllocation
from .errors import UnsupportedScopeError


@dataclass(frozen=True)
class GreedyTrace:
    """Item order used (indices into the instance's types) and, aligned
    with it, the agent that received each item."""

    item_order: tuple[int, ...]
    recipients: tuple[int, ...]


def greedy_allocate(instance: Instance) -> tuple[IntegralAllocation, GreedyTrace]:
    """Allocate unit-copy goods greedily by the first agent's valuation.

    Items are sorted by descending first-agent value (ties keep the
    original order); each goes to the bundle of minimum first-agent value,
    ties to the smallest agent index.
    """
    if instance.kind != "goods":
        raise UnsupportedScopeError("greedy_allocate requires a goods instance")
    if any(s != 1 for s in instance.group_sizes) or any(
        k != 1 for k in instance.type_copies
    ):
        raise UnsupportedScopeError(
            "greedy_allocate is defined for single-agent groups with one copy per type"
        )
    n, m = instance.d, instance.t
    lead = instance.values[0]
    order = sorted(range(m), key=lambda j: (-lead[j], j))

    counts = [[0] * m for _ in range(n)]
    bundle_value = [Fraction(0)] * n
    recipients: list[int] = []
    for j in order:
        pick = min(range(n), key=lambda i: (bundle_value[i], i))
        counts[pick][j] = 1
        bundle_value[pick] += lead[j]
        recipients.append(pick)

    return IntegralAllocation(counts), GreedyTrace(tuple(order), tuple(recipients))
