"""Integral rounding of fractional allocations, with verified loss bounds.

round_envy turns a complete fractional allocation over multi-copy types
into an integral one through three pooling phases plus a coefficient
decomposition of each pool; all arithmetic after float snapping is exact,
and mass conservation, the pooled-mass bound, and the pairwise gap-loss
bound are asserted per run.

round_proportional rounds a basic per-item LP solution for single agents:
the fractionally held items form a forest at a vertex (cycles from
degenerate ties are cancelled first), and orienting each tree away from an
agent root yields an assignment losing each agent at most one item's value
(goods) or adding at most one item's cost (chores).  The guarantee is
re-verified in exact rationals on every call.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .core import (
    FractionalAllocation,
    Instance,
    IntegralAllocation,
    thresholds,
)
from .errors import (
    InstanceError,
    InternalInvariantError,
    PreconditionError,
    UnsupportedScopeError,
)
from .frobenius import decompose

_SNAP = Fraction(1, 10**9)


@dataclass
class RoundingTrace:
    """Exact audit trail of the three phases, per type.

    ``pool_after_phase*[z]`` is the pooled mass of type z after each phase
    (integers from phase 1 on).  ``removed[i][z]`` is the total mass taken
    from group i's holding of type z across all phases.
    ``surplus_coefficients[i][z]`` is the number of size-n_i blocks of type
    z handed back when the pool is decomposed.  ``pooled_total`` is the
    total pooled mass after phase 3, and the two constants are the bounds
    it is measured against: ``pool_bound`` counts the per-type pooling
    actually performed; ``pool_bound_no_slack`` is the tighter constant
    that ignores the per-type fractional-part pooling.
    """

    pool_after_phase1: tuple[int, ...]
    pool_after_phase2: tuple[int, ...]
    pool_after_phase3: tuple[int, ...]
    removed: tuple[tuple[Fraction, ...], ...]
    surplus_coefficients: tuple[tuple[int, ...], ...]
    pooled_total: int
    pool_bound: int
    pool_bound_no_slack: int
    gap_loss_constant: int


def _exact_shares(instance: Instance, fractional: FractionalAllocation) -> list[list[Fraction]]:
    shares = np.asarray(fractional.shares, dtype=np.float64)
    if shares.shape != (instance.d, instance.t):
        raise InstanceError(
            f"share matrix has shape {shares.shape}, expected {(instance.d, instance.t)}"
        )
    if float(shares.min(initial=0.0)) < -1e-9:
        raise InstanceError("fractional shares must be nonnegative")
    return [[Fraction(max(float(x), 0.0)) for x in row] for row in shares]


def _pairwise_gaps(instance: Instance, holdings: Sequence[Sequence[Fraction]]) -> list:
    sign = 1 if instance.kind == "goods" else -1
    d = instance.d
    vals = [
        [
            sum(
                (instance.values[i][z] * holdings[j][z] for z in range(instance.t)),
                Fraction(0),
            )
            for j in range(d)
        ]
        for i in range(d)
    ]
    return [[sign * (vals[i][i] - vals[i][j]) for j in range(d)] for i in range(d)]


def round_envy(
    instance: Instance,
    fractional: FractionalAllocation,
    enforce_preconditions: bool = True,
) -> tuple[IntegralAllocation, RoundingTrace]:
    """Round a complete fractional allocation to group-level integrality.

    Preconditions (unless relaxed): every copy count is at least the
    representability threshold theta and divisible by the size gcd g.
    Phase 1 pools each type's fractional group masses and unallocated
    capacity; phase 2 reduces each group's mass to a multiple of its size;
    phase 3 removes whole-group blocks (largest current mass first, ties to
    the smaller group index) until the pool reaches theta; the pool is then
    decomposed into group-size blocks and handed back in group-index order.
    """
    d, t = instance.d, instance.t
    sizes = instance.group_sizes
    th = thresholds(sizes)
    g, theta = th.g, th.theta

    bad = [
        z
        for z, k in enumerate(instance.type_copies)
        if k < theta or k % g != 0
    ]
    if bad and enforce_preconditions:
        raise PreconditionError(
            f"copy counts {[instance.type_copies[z] for z in bad]} of types {bad} "
            f"violate the rounding precondition (need >= {theta} and divisible by {g})"
        )

    X = _exact_shares(instance, fractional)
    # Group masses B[i][z] = n_i * x[i][z], capped to capacity type by type.
    B: list[list[Fraction]] = [
        [Fraction(sizes[i]) * X[i][z] for z in range(t)] for i in range(d)
    ]
    for z in range(t):
        k_z = instance.type_copies[z]
        used = sum(B[i][z] for i in range(d))
        if used > k_z:
            if used > k_z + Fraction(1, 10**6) * max(1, k_z):
                raise InstanceError(f"type {z} is overallocated by {float(used - k_z)!r}")
            scale = Fraction(k_z) / used
            for i in range(d):
                B[i][z] *= scale

    original_B = [row[:] for row in B]

    # Snap near-integers produced by float noise before taking floors.
    for i in range(d):
        for z in range(t):
            nearest = round(B[i][z])
            if abs(B[i][z] - nearest) <= _SNAP:
                B[i][z] = Fraction(nearest)

    pool1: list[int] = []
    for z in range(t):
        floors = [B[i][z].numerator // B[i][z].denominator for i in range(d)]
        for i in range(d):
            B[i][z] = Fraction(floors[i])
        s_z = instance.type_copies[z] - sum(floors)
        if s_z < 0:  # pragma: no cover - capped above
            raise InternalInvariantError(f"negative pool for type {z}")
        pool1.append(s_z)

    pool2: list[int] = []
    for z in range(t):
        s_z = pool1[z]
        for i in range(d):
            r = int(B[i][z]) % sizes[i]
            B[i][z] -= r
            s_z += r
        pool2.append(s_z)

    pool3: list[int] = []
    for z in range(t):
        s_z = pool2[z]
        while s_z < theta:
            pick = -1
            best = -1
            for i in range(d):
                mass = int(B[i][z])
                if mass > best:
                    best = mass
                    pick = i
            if best <= 0:
                if enforce_preconditions:  # pragma: no cover - k_z >= theta rules it out
                    raise InternalInvariantError(
                        f"type {z}: pool {s_z} below {theta} with no removable block"
                    )
                break
            B[pick][z] -= sizes[pick]
            s_z += sizes[pick]
        pool3.append(s_z)

    # Mass conservation at the final boundary, in exact integers.
    for z in range(t):
        if sum(int(B[i][z]) for i in range(d)) + pool3[z] != instance.type_copies[z]:
            raise InternalInvariantError(f"mass conservation failed for type {z}")

    surplus: list[list[int]] = [[0] * t for _ in range(d)]
    counts: list[list[int]] = [[0] * t for _ in range(d)]
    undistributed = [0] * t
    for z in range(t):
        dec = decompose(sizes, pool3[z])
        if dec is None:
            if enforce_preconditions:
                raise PreconditionError(
                    f"pooled mass {pool3[z]} of type {z} is not representable by {sizes}"
                )
            # Best effort: the pool stays unallocated for this type.
            undistributed[z] = pool3[z]
            dec = None
        for i in range(d):
            coeff = dec.coefficients[i] if dec is not None else 0
            surplus[i][z] = coeff
            counts[i][z] = int(B[i][z]) // sizes[i] + coeff

    allocation = IntegralAllocation(counts)
    supply = tuple(
        sum(sizes[i] * counts[i][z] for i in range(d)) for z in range(t)
    )
    if tuple(s + u for s, u in zip(supply, undistributed)) != instance.type_copies:
        raise InternalInvariantError("rounded mass does not add back to the copy counts")
    if enforce_preconditions and any(undistributed):  # pragma: no cover
        raise InternalInvariantError("rounded allocation is not complete")

    n, n_d = instance.n, sizes[-1]
    pool_bound = d * (d - 1) + t + t * (n - d) + t * (theta + n_d - 1)
    pool_bound_no_slack = d * (d - 1) + t * (n - d) + t * (theta + n_d - 1)
    gap_loss_constant = d * (d - 1) + t + t * (theta + n + n_d - d - 1)
    pooled_total = sum(pool3)

    removed = tuple(
        tuple(original_B[i][z] - Fraction(int(B[i][z])) for z in range(t))
        for i in range(d)
    )

    trace = RoundingTrace(
        pool_after_phase1=tuple(pool1),
        pool_after_phase2=tuple(pool2),
        pool_after_phase3=tuple(pool3),
        removed=removed,
        surplus_coefficients=tuple(tuple(row) for row in surplus),
        pooled_total=pooled_total,
        pool_bound=pool_bound,
        pool_bound_no_slack=pool_bound_no_slack,
        gap_loss_constant=gap_loss_constant,
    )

    if fractional.complete and not any(undistributed):
        if pooled_total > pool_bound:
            raise InternalInvariantError(
                f"pooled mass {pooled_total} exceeds the bound {pool_bound}"
            )
        # Pairwise gap-loss bound, exact: rounding costs each pair at most
        # 2 * C * (the envious group's largest per-copy value).
        before = _pairwise_gaps(instance, X)
        after = _pairwise_gaps(
            instance, [[Fraction(counts[i][z]) for z in range(t)] for i in range(d)]
        )
        C = Fraction(2 * gap_loss_constant)
        for i in range(d):
            vmax = max(instance.values[i])
            for j in range(d):
                if i == j:
                    continue
                if after[i][j] < before[i][j] - C * vmax:
                    raise InternalInvariantError(
                        f"gap loss bound violated for pair ({i}, {j})"
                    )

    return allocation, trace


# ---------------------------------------------------------------------------
# Forest rounding for per-item proportional shares


def _find_cycle(adj: dict[int, list[int]]) -> Optional[list[int]]:
    """Return one cycle as an ordered node list, or None if the graph is a forest."""
    visited: set[int] = set()
    for start in sorted(adj):
        if start in visited:
            continue
        parent: dict[int, Optional[int]] = {start: None}
        visited.add(start)
        queue = [start]
        qi = 0
        while qi < len(queue):
            node = queue[qi]
            qi += 1
            for nxt in adj[node]:
                if nxt not in parent:
                    parent[nxt] = node
                    visited.add(nxt)
                    queue.append(nxt)
                elif parent[node] != nxt:
                    # Non-tree edge (node, nxt): splice the two root paths
                    # at their lowest common ancestor.
                    anc: list[int] = []
                    cur: Optional[int] = node
                    while cur is not None:
                        anc.append(cur)
                        cur = parent[cur]
                    anc_set = set(anc)
                    side: list[int] = []
                    cur = nxt
                    while cur not in anc_set:
                        side.append(cur)
                        cur = parent[cur]  # type: ignore[index]
                    cycle = anc[: anc.index(cur) + 1]
                    cycle.extend(reversed(side))
                    return cycle
    return None


def _cancel_cycles(x: dict[tuple[int, int], Fraction], n: int) -> None:
    """Remove cycles from the fractional bipartite graph by shifting mass.

    Alternating +delta / -delta around a cycle preserves every node's total
    (each cycle node carries one edge of each sign), and delta is the
    smallest mass on the decreasing edges, so each pass deletes at least
    one edge.  The per-agent guarantee is re-verified after rounding, so
    no direction bookkeeping is needed here.
    """
    while True:
        adj: dict[int, list[int]] = {}
        for (i, j) in x:
            adj.setdefault(i, []).append(n + j)
            adj.setdefault(n + j, []).append(i)
        for nbrs in adj.values():
            nbrs.sort()
        cycle = _find_cycle(adj)
        if cycle is None:
            return

        edges = []
        for idx in range(len(cycle)):
            a, b = cycle[idx], cycle[(idx + 1) % len(cycle)]
            agent, item = (a, b - n) if a < n else (b, a - n)
            edges.append((agent, item))
        minus = edges[1::2]
        delta = min(x[e] for e in minus)
        for idx, e in enumerate(edges):
            if idx % 2 == 0:
                x[e] += delta
            else:
                x[e] -= delta
                if x[e] == 0:
                    del x[e]


def round_proportional(
    instance: Instance, fractional: FractionalAllocation
) -> IntegralAllocation:
    """Round a per-item fractional allocation losing at most one item each.

    Scope: single-agent groups, one copy per type.  For goods the output
    satisfies v_i(A_i) >= v_i(x_i) - max_j v_{i,j}; for chores
    c_i(A_i) <= c_i(x_i) + max_j c_{i,j}.  Both are checked exactly before
    returning.  Items the input leaves wholly unallocated go to the agent
    valuing them most (goods); chores inputs must allocate every item.
    """
    if any(s != 1 for s in instance.group_sizes) or any(
        k != 1 for k in instance.type_copies
    ):
        raise UnsupportedScopeError(
            "round_proportional is defined for single-agent groups with unit copies"
        )
    n, m = instance.d, instance.t
    shares = np.asarray(fractional.shares, dtype=np.float64)
    if shares.shape != (n, m):
        raise InstanceError(f"share matrix has shape {shares.shape}, expected {(n, m)}")

    X: list[list[Fraction]] = [[Fraction(0)] * m for _ in range(n)]
    frac_edges: dict[tuple[int, int], Fraction] = {}
    owner = [-1] * m
    for j in range(m):
        col = shares[:, j]
        total = float(col.sum())
        if total > 1.0 + 1e-6:
            raise InstanceError(f"item {j} is allocated {total!r} times")
        for i in range(n):
            v = float(col[i])
            if v <= 1e-9:
                continue
            if v >= 1.0 - 1e-9:
                v = 1.0
            X[i][j] = Fraction(v)
            if v == 1.0:
                owner[j] = i
            else:
                frac_edges[(i, j)] = Fraction(v)

    if instance.kind == "chores":
        for j in range(m):
            got = sum(X[i][j] for i in range(n))
            if abs(float(got) - 1.0) > 1e-6:
                raise InstanceError(f"chore {j} must be fully allocated, got {float(got)!r}")

    _cancel_cycles(frac_edges, n)
    # Cancelling can push an edge to a full unit; absorb those.
    for (i, j), v in list(frac_edges.items()):
        if v >= 1:
            owner[j] = i
            del frac_edges[(i, j)]

    # The remaining fractional edges form a forest.  Root every tree at its
    # smallest agent node and orient away from the root.
    adj: dict[int, list[int]] = {}
    for (i, j) in frac_edges:
        adj.setdefault(i, []).append(n + j)
        adj.setdefault(n + j, []).append(i)
    for nbrs in adj.values():
        nbrs.sort()

    parent: dict[int, int] = {}
    visited: set[int] = set()
    for root in sorted(node for node in adj if node < n):
        if root in visited:
            continue
        parent[root] = -1
        stack = [root]
        visited.add(root)
        while stack:
            node = stack.pop()
            for nxt in adj[node]:
                if nxt in visited:
                    continue
                visited.add(nxt)
                parent[nxt] = node
                stack.append(nxt)
    if any(node not in visited for node in adj):  # pragma: no cover
        raise InternalInvariantError("fractional item with no adjacent agent")

    goods = instance.kind == "goods"
    for j in sorted({j for (_, j) in frac_edges}):
        node = n + j
        if goods:
            # Assign the item to the agent on its root side: each agent can
            # lose at most its single parent item this way.
            owner[j] = parent[node]
        else:
            children = sorted(nbr for nbr in adj[node] if parent.get(nbr) == node)
            if children:
                owner[j] = children[0]
            else:
                # Degree-one fractional chores cannot happen on equality
                # inputs; fall back to the parent agent to stay complete.
                owner[j] = parent[node]

    for j in range(m):
        if owner[j] < 0:
            if instance.kind == "chores":  # pragma: no cover - rejected above
                raise InternalInvariantError(f"chore {j} left unassigned")
            # Wholly unallocated good: give it to whoever values it most.
            best = max(range(n), key=lambda i: (instance.values[i][j], -i))
            owner[j] = best

    counts = [[0] * m for _ in range(n)]
    for j, i in enumerate(owner):
        counts[i][j] = 1
    allocation = IntegralAllocation(counts)

    # Exact one-item loss/add guarantee, relative to the cleaned input.
    for i in range(n):
        frac_value = sum(
            (instance.values[i][j] * X[i][j] for j in range(m)), Fraction(0)
        )
        final_value = instance.bundle_value(i, counts[i])
        extreme = max(instance.values[i])
        if goods:
            if final_value < frac_value - extreme:
                raise InternalInvariantError(
                    f"agent {i} lost more than one item's value in rounding"
                )
        else:
            if final_value > frac_value + extreme:
                raise InternalInvariantError(
                    f"agent {i} gained more than one chore's cost in rounding"
                )
    return allocation
