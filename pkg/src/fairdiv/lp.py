"""Linear programs for gap maximization and proportional shares.

The in-package solver is a dense-tableau two-phase simplex with Bland's
anti-cycling rule.  It returns basic (vertex) solutions and extracts a dual
solution from the final tableau; every optimal result is certified by a
duality-gap check before it is returned.  Large sparse programs (the
per-item proportionality LPs at experiment scale) are routed to scipy's
HiGHS solver behind the same contract, with duals taken from the solver's
marginals and certified the same way.

Variable layout used by the builders: index 0 is the scalar objective
variable (the worst-case gap or share), followed by the d*t share variables
in group-major order.  All variables are nonnegative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .core import (
    FractionalAllocation,
    Instance,
    l1_normalized,
    l2_normalized,
)
from .errors import (
    InstanceError,
    InternalInvariantError,
    SolverError,
    UnsupportedScopeError,
)

Relation = Literal["<=", "=", ">="]
Status = Literal["optimal", "unbounded", "infeasible"]

_PIVOT_TOL = 1e-9
_COST_TOL = 1e-9
_CERT_TOL = 1e-6
_DENSE_CELL_LIMIT = 4_000_000


@dataclass
class LinearProgram:
    """min/max objective @ x subject to row_coeffs @ x (relations) row_rhs, x >= 0.

    ``tie_break_objective``, when set, is maximized among the primary
    optima (a lexicographic second stage).  The gap LPs use it to prefer
    mass-maximal vertices, so degenerate instances with alternate optima
    do not hand the rounding phase a wholly unallocated solution.
    """

    direction: Literal["max", "min"]
    objective: np.ndarray
    row_coeffs: Union[np.ndarray, sp.spmatrix]
    row_relations: tuple[str, ...]
    row_rhs: np.ndarray
    tie_break_objective: Optional[np.ndarray] = None

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=np.float64)
        self.row_rhs = np.asarray(self.row_rhs, dtype=np.float64)
        if self.tie_break_objective is not None:
            self.tie_break_objective = np.asarray(self.tie_break_objective, dtype=np.float64)
            if self.tie_break_objective.shape != self.objective.shape:
                raise InstanceError("tie-break objective length does not match the objective")
            if not np.all(np.isfinite(self.tie_break_objective)):
                raise InstanceError("tie-break objective must be finite")
        if self.direction not in ("max", "min"):
            raise InstanceError(f"direction must be 'max' or 'min', got {self.direction!r}")
        if self.objective.ndim != 1 or self.objective.size == 0:
            raise InstanceError("objective must be a nonempty vector")
        nrows, ncols = self.row_coeffs.shape
        if ncols != self.objective.size:
            raise InstanceError("row_coeffs width does not match objective length")
        if nrows != self.row_rhs.size or nrows != len(self.row_relations):
            raise InstanceError("row count mismatch between coefficients, relations, rhs")
        for rel in self.row_relations:
            if rel not in ("<=", "=", ">="):
                raise InstanceError(f"unknown relation {rel!r}")
        if not sp.issparse(self.row_coeffs):
            self.row_coeffs = np.asarray(self.row_coeffs, dtype=np.float64)
            if not np.all(np.isfinite(self.row_coeffs)):
                raise InstanceError("row coefficients must be finite")
        if not (np.all(np.isfinite(self.objective)) and np.all(np.isfinite(self.row_rhs))):
            raise InstanceError("objective and rhs must be finite")

    @property
    def nvars(self) -> int:
        return self.objective.size

    @property
    def nrows(self) -> int:
        return self.row_rhs.size


@dataclass
class LpSolution:
    status: Status
    objective_value: Optional[float]
    variable_values: Optional[np.ndarray]
    basis: tuple[int, ...]
    dual_values: Optional[np.ndarray]
    duality_gap: Optional[float]
    method: str


def _certify(lp: LinearProgram, x: np.ndarray, y: np.ndarray) -> float:
    """Check the dual certificate; returns the absolute duality gap.

    For a max problem: y >= 0 on <= rows, y <= 0 on >= rows, free on =,
    and A^T y >= objective (coordinatewise, since x >= 0).  Min problems
    mirror the signs.  Raises if the certificate fails.
    """
    primal = float(lp.objective @ x)
    dual = float(lp.row_rhs @ y)
    scale = max(1.0, abs(primal))
    gap = abs(primal - dual)
    if gap > _CERT_TOL * scale:
        raise SolverError(f"duality gap {gap:.3e} exceeds tolerance (primal {primal:.6e})")

    sign = 1.0 if lp.direction == "max" else -1.0
    for r, rel in enumerate(lp.row_relations):
        if rel == "<=" and sign * y[r] < -1e-7:
            raise SolverError(f"dual sign violated on <= row {r}: {y[r]!r}")
        if rel == ">=" and sign * y[r] > 1e-7:
            raise SolverError(f"dual sign violated on >= row {r}: {y[r]!r}")
    if sp.issparse(lp.row_coeffs):
        aty = np.asarray(lp.row_coeffs.T @ y).ravel()
    else:
        aty = lp.row_coeffs.T @ y
    resid = aty - lp.objective
    tol = 1e-7 * max(1.0, float(np.max(np.abs(lp.objective)))) + 1e-7
    if lp.direction == "max":
        worst = float(np.min(resid))
        if worst < -tol:
            raise SolverError(f"dual infeasibility {worst:.3e} on a max program")
    else:
        worst = float(np.max(resid))
        if worst > tol:
            raise SolverError(f"dual infeasibility {worst:.3e} on a min program")
    return gap


def _solve_dense(lp: LinearProgram) -> LpSolution:
    m, n = lp.nrows, lp.nvars
    A = np.array(lp.row_coeffs, dtype=np.float64)
    b = np.array(lp.row_rhs, dtype=np.float64)
    rels = list(lp.row_relations)
    flipped = np.zeros(m, dtype=bool)
    for r in range(m):
        if b[r] < 0:
            A[r] = -A[r]
            b[r] = -b[r]
            flipped[r] = True
            rels[r] = {"<=": ">=", ">=": "<=", "=": "="}[rels[r]]

    # Column layout: structural | slack/surplus | artificial.
    slack_col = {}
    art_col = {}
    ncols = n
    for r in range(m):
        if rels[r] in ("<=", ">="):
            slack_col[r] = ncols
            ncols += 1
    for r in range(m):
        if rels[r] in ("=", ">="):
            art_col[r] = ncols
            ncols += 1

    T = np.zeros((m, ncols + 1))
    T[:, :n] = A
    T[:, -1] = b
    basis = np.empty(m, dtype=np.int64)
    for r in range(m):
        if rels[r] == "<=":
            T[r, slack_col[r]] = 1.0
            basis[r] = slack_col[r]
        elif rels[r] == ">=":
            T[r, slack_col[r]] = -1.0
            T[r, art_col[r]] = 1.0
            basis[r] = art_col[r]
        else:
            T[r, art_col[r]] = 1.0
            basis[r] = art_col[r]

    art_set = frozenset(art_col.values())

    c2 = np.zeros(ncols + 1)
    c2[:n] = -lp.objective if lp.direction == "max" else lp.objective

    # rhs cell of a cost row holds minus the current objective value.
    c1 = np.zeros(ncols + 1)
    for col in art_set:
        c1[col] = 1.0
    for r in range(m):
        if basis[r] in art_set:
            c1 -= T[r]

    cost = np.vstack([c2, c1])
    max_iters = max(20_000, 64 * (m + ncols))

    def pivot(row: int, col: int) -> None:
        T[row] /= T[row, col]
        colvals = T[:, col].copy()
        colvals[row] = 0.0
        T[:] -= np.outer(colvals, T[row])
        cost[:] -= np.outer(cost[:, col].copy(), T[row])
        basis[row] = col

    def run_phase(phase: int, barred: frozenset, lock_row: Optional[int] = None) -> Optional[str]:
        # lock_row guards a lexicographic stage: only columns whose reduced
        # cost in that row is (numerically) zero may enter, so the locked
        # objective keeps its optimal value while this phase improves.
        for _ in range(max_iters):
            row = cost[phase]
            entering = -1
            for j in range(ncols):
                if j in barred:
                    continue
                if lock_row is not None and cost[lock_row, j] > _COST_TOL:
                    continue
                if row[j] < -_COST_TOL:
                    entering = j
                    break
            if entering < 0:
                return None  # optimal for this phase
            ratios_row = -1
            best = math.inf
            for r in range(m):
                a = T[r, entering]
                if a > _PIVOT_TOL:
                    ratio = T[r, -1] / a
                    if ratio < best - 1e-12 or (
                        abs(ratio - best) <= 1e-12
                        and (ratios_row < 0 or basis[r] < basis[ratios_row])
                    ):
                        best = ratio
                        ratios_row = r
            if ratios_row < 0:
                return "unbounded"
            pivot(ratios_row, entering)
        raise SolverError("simplex cycling guard tripped (iteration cap reached)")

    if art_set:
        outcome = run_phase(1, frozenset())
        if outcome == "unbounded":  # pragma: no cover - phase 1 is bounded below
            raise SolverError("phase-1 subproblem reported unbounded")
        if -cost[1, -1] > 1e-7 * max(1.0, float(np.max(b, initial=0.0))):
            return LpSolution("infeasible", None, None, (), None, None, "dense-simplex")
        # Drive artificials out of the basis where possible; drop redundant rows.
        drop_rows = []
        for r in range(m):
            if basis[r] in art_set:
                target = -1
                for j in range(ncols):
                    if j not in art_set and abs(T[r, j]) > _PIVOT_TOL:
                        target = j
                        break
                if target >= 0:
                    pivot(r, target)
                else:
                    drop_rows.append(r)
        if drop_rows:
            keep = [r for r in range(m) if r not in set(drop_rows)]
            T = T[keep]
            basis = basis[keep]
            m = len(keep)

    outcome = run_phase(0, art_set)
    if outcome == "unbounded":
        return LpSolution("unbounded", None, None, (), None, None, "dense-simplex")

    if lp.tie_break_objective is not None:
        # Lexicographic stage: maximize the tie-break among primary optima.
        tb = np.zeros(ncols + 1)
        tb[:n] = -lp.tie_break_objective
        for r in range(m):
            if tb[basis[r]] != 0.0:
                tb -= tb[basis[r]] * T[r]
        cost = np.vstack([cost, tb])
        run_phase(cost.shape[0] - 1, art_set, lock_row=0)

    x = np.zeros(ncols)
    for r in range(m):
        x[basis[r]] = T[r, -1]
    xvars = np.clip(x[:n], 0.0, None)
    objective_value = float(lp.objective @ xvars)

    # Duals in the normalized (min, rhs >= 0) frame, read off the identity
    # columns the tableau started with.
    y_norm = np.zeros(lp.nrows)
    for r in range(lp.nrows):
        if r in art_col:
            y_norm[r] = -cost[0, art_col[r]]
        elif r in slack_col:
            y_norm[r] = -cost[0, slack_col[r]]
    # Undo row flips, then undo the max -> min negation.
    y = np.where(flipped, -y_norm, y_norm)
    if lp.direction == "max":
        y = -y

    gap = _certify(lp, xvars, y)
    basis_vars = tuple(sorted(int(v) for v in basis if v < n))
    return LpSolution("optimal", objective_value, xvars, basis_vars, y, gap, "dense-simplex")


def _solve_highs(lp: LinearProgram) -> LpSolution:
    c = -lp.objective if lp.direction == "max" else lp.objective
    A = lp.row_coeffs if sp.issparse(lp.row_coeffs) else np.asarray(lp.row_coeffs)

    ub_rows, eq_rows = [], []
    ub_negated = []
    for r, rel in enumerate(lp.row_relations):
        if rel == "=":
            eq_rows.append(r)
        else:
            ub_rows.append(r)
            ub_negated.append(rel == ">=")

    def take(rows: list[int], negate: Optional[list[bool]] = None):
        if not rows:
            return None, None
        if sp.issparse(A):
            block = A[rows].tocsr(copy=True)
        else:
            block = A[rows].copy()
        rhs = lp.row_rhs[rows].copy()
        if negate is not None:
            for idx, neg in enumerate(negate):
                if neg:
                    if sp.issparse(block):
                        block[idx] = -block[idx]
                    else:
                        block[idx] = -block[idx]
                    rhs[idx] = -rhs[idx]
        return block, rhs

    A_ub, b_ub = take(ub_rows, ub_negated)
    A_eq, b_eq = take(eq_rows)

    # Dual simplex on moderate programs; interior point with crossover on
    # very large ones, where it is an order of magnitude faster and the
    # crossover step still lands on a basic solution.  Both are
    # deterministic and the certificate below is checked either way.
    method = "highs-ipm" if lp.nvars >= 10_000 else "highs-ds"
    res = linprog(
        c,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=(0, None),
        method=method,
    )
    if res.status == 2:
        return LpSolution("infeasible", None, None, (), None, None, "highs")
    if res.status == 3:
        return LpSolution("unbounded", None, None, (), None, None, "highs")
    if res.status != 0:
        raise SolverError(f"HiGHS failed: {res.message}")

    x = np.clip(np.asarray(res.x, dtype=np.float64), 0.0, None)
    objective_value = float(lp.objective @ x)

    y = np.zeros(lp.nrows)
    if ub_rows:
        marg = np.asarray(res.ineqlin.marginals, dtype=np.float64)
        for idx, r in enumerate(ub_rows):
            y[r] = -marg[idx] if ub_negated[idx] else marg[idx]
    if eq_rows:
        marg = np.asarray(res.eqlin.marginals, dtype=np.float64)
        for idx, r in enumerate(eq_rows):
            y[r] = marg[idx]
    if lp.direction == "max":
        y = -y

    gap = _certify(lp, x, y)

    if lp.tie_break_objective is not None:
        # Second solve on the (tolerance) optimal face, maximizing the
        # tie-break.  The stage-1 duals still certify the returned point:
        # its primary objective moves by at most the face tolerance, far
        # inside the certificate tolerance.
        tol = 1e-9 * max(1.0, abs(objective_value))
        if lp.direction == "max":
            floor_row = -lp.objective
            floor_rhs = -(objective_value - tol)
        else:
            floor_row = lp.objective.copy()
            floor_rhs = objective_value + tol
        if A_ub is None:
            A_ub2: Union[np.ndarray, sp.csr_matrix] = floor_row.reshape(1, -1)
            b_ub2 = np.array([floor_rhs])
        elif sp.issparse(A_ub):
            A_ub2 = sp.vstack([A_ub, sp.csr_matrix(floor_row)]).tocsr()
            b_ub2 = np.append(b_ub, floor_rhs)
        else:
            A_ub2 = np.vstack([A_ub, floor_row])
            b_ub2 = np.append(b_ub, floor_rhs)
        res2 = linprog(
            -lp.tie_break_objective,
            A_ub=A_ub2,
            b_ub=b_ub2,
            A_eq=A_eq,
            b_eq=b_eq,
            bounds=(0, None),
            method=method,
        )
        if res2.status == 0:
            x = np.clip(np.asarray(res2.x, dtype=np.float64), 0.0, None)
            objective_value = float(lp.objective @ x)
            gap = _certify(lp, x, y)

    basis_vars = tuple(int(j) for j in np.nonzero(x > 1e-9)[0])
    return LpSolution("optimal", objective_value, x, basis_vars, y, gap, "highs")


def solve(lp: LinearProgram) -> LpSolution:
    """Solve to optimality with a verified dual certificate.

    Identical inputs produce identical outputs: both backends are
    deterministic and the routing rule depends only on the program shape.
    The tie-break objective is honored on both backends: the dense simplex
    optimizes it lexicographically, and the HiGHS path re-solves on the
    optimal face.  Downstream rounding relies on this to receive points
    without gratuitous capacity slack.
    """
    if sp.issparse(lp.row_coeffs):
        return _solve_highs(lp)
    cells = (lp.nrows + 2) * (lp.nvars + 2 * lp.nrows + 1)
    if cells > _DENSE_CELL_LIMIT:
        return _solve_highs(lp)
    return _solve_dense(lp)


# ---------------------------------------------------------------------------
# Builders


def build_gap_lp(instance: Instance) -> LinearProgram:
    """Per-type LP maximizing the worst normalized pairwise gap.

    Goods rows bound the objective by each pair's normalized advantage
    sum_z w[i][z]*(x[i][z]-x[j][z]); chores swap the two bundles.  Shares
    count copies per agent, so the capacity row for type z reads
    sum_i n_i * x[i][z] <= k_z.
    """
    d, t = instance.d, instance.t
    if d < 2:
        raise UnsupportedScopeError("gap LP requires at least two groups")
    weights = l2_normalized(instance) if instance.kind == "goods" else l1_normalized(instance)

    nvars = 1 + d * t
    rows = []
    rels = []
    rhs = []
    for i in range(d):
        for j in range(d):
            if i == j:
                continue
            row = np.zeros(nvars)
            row[0] = 1.0
            own = 1.0 if instance.kind == "goods" else -1.0
            row[1 + i * t : 1 + (i + 1) * t] = -own * weights[i]
            row[1 + j * t : 1 + (j + 1) * t] = own * weights[i]
            rows.append(row)
            rels.append("<=")
            rhs.append(0.0)
    for z in range(t):
        # Scaled to unit rhs so large copy counts keep the tableau
        # well-conditioned: sum_i (n_i / k_z) x[i][z] <= 1.
        row = np.zeros(nvars)
        k_z = float(instance.type_copies[z])
        for i in range(d):
            row[1 + i * t + z] = float(instance.group_sizes[i]) / k_z
        rows.append(row)
        rels.append("<=")
        rhs.append(1.0)

    objective = np.zeros(nvars)
    objective[0] = 1.0
    # Among gap-optimal vertices prefer the ones that allocate the most
    # mass; otherwise degenerate ties (identical rows) leave everything to
    # the rounding pool, which lands on a single group.
    tie_break = np.ones(nvars)
    tie_break[0] = 0.0
    return LinearProgram(
        "max", objective, np.vstack(rows), tuple(rels), np.array(rhs), tie_break
    )


def _require_unit_scope(instance: Instance, what: str) -> None:
    if any(s != 1 for s in instance.group_sizes) or any(k != 1 for k in instance.type_copies):
        raise UnsupportedScopeError(
            f"{what} is defined for single-agent groups with one copy per type"
        )


def build_prop_lp(instance: Instance) -> LinearProgram:
    """Per-item share LP for single agents and unit copies.

    Goods: maximize the worst normalized utility, items at most fully
    allocated.  Chores: minimize the worst normalized cost, items exactly
    fully allocated.
    """
    _require_unit_scope(instance, "the proportional-share LP")
    n, m = instance.d, instance.t
    weights = l1_normalized(instance)
    nvars = 1 + n * m
    # Keep the constraint matrix sparse whenever densifying it would blow
    # past the dense-solver cell budget; those programs route to HiGHS.
    big = (n + m) * nvars > _DENSE_CELL_LIMIT

    data, rows_idx, cols_idx = [], [], []
    rels: list[str] = []
    rhs: list[float] = []

    def add_entry(r: int, c: int, v: float) -> None:
        rows_idx.append(r)
        cols_idx.append(c)
        data.append(v)

    r = 0
    goods = instance.kind == "goods"
    for i in range(n):
        # goods: alpha - w_i . x_i <= 0 ; chores: w_i . x_i - alpha <= 0
        add_entry(r, 0, 1.0 if goods else -1.0)
        for j in range(m):
            add_entry(r, 1 + i * m + j, -weights[i, j] if goods else weights[i, j])
        rels.append("<=")
        rhs.append(0.0)
        r += 1
    for j in range(m):
        for i in range(n):
            add_entry(r, 1 + i * m + j, 1.0)
        rels.append("<=" if goods else "=")
        rhs.append(1.0)
        r += 1

    matrix = sp.csr_matrix((data, (rows_idx, cols_idx)), shape=(r, nvars))
    if not big:
        matrix = matrix.toarray()
    objective = np.zeros(nvars)
    objective[0] = 1.0
    return LinearProgram(
        "max" if goods else "min", objective, matrix, tuple(rels), np.array(rhs)
    )


# ---------------------------------------------------------------------------
# Vertex post-processing


def sparsify_to_vertex(
    solution: LpSolution, instance: Instance
) -> tuple[FractionalAllocation, int]:
    """Turn a basic gap-LP solution into a complete fractional allocation.

    Shares below 1e-9 are clamped to zero.  The count of strictly positive
    share variables in the basic solution is returned and asserted against
    the vertex bound t + d(d-1).  Remaining capacity of every type is then
    spread uniformly, 1/n of the leftover per agent; this leaves every
    pairwise gap unchanged and makes the allocation exactly complete.
    """
    if solution.status != "optimal" or solution.variable_values is None:
        raise InstanceError("sparsify requires an optimal LP solution")
    d, t = instance.d, instance.t
    if solution.variable_values.size != 1 + d * t:
        raise InstanceError("solution does not match the gap-LP layout for this instance")
    shares = solution.variable_values[1:].reshape(d, t).copy()

    positive = int(np.count_nonzero(shares > 1e-9))
    bound = t + d * (d - 1)
    if positive > bound:
        raise InternalInvariantError(
            f"{positive} positive share variables exceed the vertex bound {bound}; "
            "the input is not a basic solution"
        )
    shares[shares <= 1e-9] = 0.0

    sizes = np.array(instance.group_sizes, dtype=np.float64)
    n = float(instance.n)
    for z in range(t):
        used = float(sizes @ shares[:, z])
        k_z = float(instance.type_copies[z])
        if used > k_z:
            if used > k_z * (1 + 1e-6) + 1e-6:
                raise InstanceError(f"type {z} is overallocated in the LP solution")
            shares[:, z] *= k_z / used
            used = k_z
        leftover = k_z - used
        if leftover > 0.0:
            shares[:, z] += leftover / n

    return FractionalAllocation(shares=shares, complete=True), positive
