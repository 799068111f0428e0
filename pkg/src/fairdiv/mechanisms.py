"""Closed-form fractional mechanisms and their analytic gap bounds.

Each mechanism returns a complete fractional allocation (shares count
copies per agent) together with a matrix of analytic bounds:

* relative_norm (goods): bounds[i][j] lower-bounds the gap
  v_i(x_i) - v_i(x_j); the bound is an exact identity of the share formula,
  so equality holds up to float error.
* log_relative_norm (chores): bounds[i][j] equals c_i(x_j) - c_i(x_i)
  exactly (an identity through the KL divergence).
* trading_post / inverse_trading_post (single agents, unit copies):
  bounds[i][i] is the agent's normalized utility (resp. cost), an identity
  through the chi-square divergence (resp. harmonic means).

Shares are computed in float64; negatives below 1e-12 from roundoff are
clamped and each type is rescaled to exact capacity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    FractionalAllocation,
    Instance,
    divergence,
    l1_normalized,
    l2_normalized,
)
from .errors import InternalInvariantError, UndefinedShareError, UnsupportedScopeError


@dataclass
class MechanismOutput:
    name: str
    allocation: FractionalAllocation
    analytic_bounds: np.ndarray
    details: dict


def _finalize_shares(instance: Instance, per_copy: np.ndarray) -> np.ndarray:
    """Clamp tiny negatives, rescale each type to exact capacity, and convert
    per-copy fractions into per-agent copy counts."""
    if float(per_copy.min()) < -1e-9:
        raise InternalInvariantError(
            f"mechanism produced a share of {per_copy.min()!r}; formula violated"
        )
    per_copy = np.clip(per_copy, 0.0, None)
    sizes = np.array(instance.group_sizes, dtype=np.float64)
    totals = sizes @ per_copy  # should be 1 per type
    if np.any(np.abs(totals - 1.0) > 1e-9):
        raise InternalInvariantError("mechanism shares do not add to one per copy")
    per_copy = per_copy / totals
    return per_copy * instance.copies_array()


def relative_norm(instance: Instance) -> MechanismOutput:
    """Shares linear in the L2-normalized values.

    Per copy of item type z, an agent of group i receives
    w[i][z]/(n*wmax) + 1/n - (sum_j n_j w[j][z])/(n^2*wmax) where w is the
    copy-weighted L2 normalization and wmax its largest entry.  Because the
    rows of w have unit copy-weighted norm, the gap v_i(x_i) - v_i(x_j)
    equals ||v_i|| * ||w_i - w_j||^2 / (2n*wmax) exactly; that value is the
    analytic bound reported.
    """
    if instance.kind != "goods":
        raise UnsupportedScopeError("relative_norm is a goods mechanism")
    d, t = instance.d, instance.t
    w = l2_normalized(instance)  # (d, t)
    wmax = float(w.max())
    n = float(instance.n)
    sizes = np.array(instance.group_sizes, dtype=np.float64)

    weighted_mean = (sizes @ w) / n  # per type: (1/n) sum_j n_j w[j][z]
    per_copy = w / (n * wmax) + 1.0 / n - weighted_mean / (n * wmax)
    shares = _finalize_shares(instance, per_copy)

    copies = instance.copies_array()
    norms = np.sqrt(((instance.values_array() ** 2) * copies).sum(axis=1))
    bounds = np.zeros((d, d))
    for i in range(d):
        for j in range(d):
            if i == j:
                continue
            dist_sq = float((copies * (w[i] - w[j]) ** 2).sum())
            bounds[i, j] = norms[i] * dist_sq / (2.0 * n * wmax)

    return MechanismOutput(
        name="relative-norm",
        allocation=FractionalAllocation(shares=shares, complete=True),
        analytic_bounds=bounds,
        details={"wmax": wmax, "norms": norms},
    )


def log_relative_norm(instance: Instance) -> MechanismOutput:
    """Shares linear in the log of the L1-normalized costs.

    Per copy, an agent of group i carries
    ln(c[i][z])/(n*L) + 1/n - (sum_j n_j ln(c[j][z]))/(n^2*L) where c is the
    copy-weighted L1 normalization and L = ln(cmin) < 0.  The pairwise cost
    gap c_i(x_j) - c_i(x_i) equals ||c_i||_1 * KL(c_i || c_j) / (-n*L),
    reported as the analytic bound (an identity).
    """
    if instance.kind != "chores":
        raise UnsupportedScopeError("log_relative_norm is a chores mechanism")
    if instance.m < 2:
        raise UnsupportedScopeError(
            "log_relative_norm needs at least two copies in total"
        )
    d, t = instance.d, instance.t
    c = l1_normalized(instance)
    cmin = float(c.min())
    if not 0.0 < cmin < 1.0:
        raise InternalInvariantError(f"normalized cost minimum {cmin!r} out of range")
    L = math.log(cmin)
    n = float(instance.n)
    sizes = np.array(instance.group_sizes, dtype=np.float64)

    logs = np.log(c)
    weighted_mean = (sizes @ logs) / n
    per_copy = logs / (n * L) + 1.0 / n - weighted_mean / (n * L)
    shares = _finalize_shares(instance, per_copy)

    copies = instance.copies_array()
    l1_norms = instance.values_array() @ copies
    bounds = np.zeros((d, d))
    for i in range(d):
        for j in range(d):
            if i == j:
                continue
            kl = float((copies * c[i] * np.log(c[i] / c[j])).sum())
            bounds[i, j] = l1_norms[i] * kl / (-n * L)

    return MechanismOutput(
        name="log-relative-norm",
        allocation=FractionalAllocation(shares=shares, complete=True),
        analytic_bounds=bounds,
        details={"cmin": cmin, "log_cmin": L},
    )


def _unit_scope(instance: Instance, name: str) -> None:
    if any(s != 1 for s in instance.group_sizes) or any(k != 1 for k in instance.type_copies):
        raise UnsupportedScopeError(
            f"{name} is defined for single-agent groups with one copy per item"
        )


def trading_post(instance: Instance) -> MechanismOutput:
    """Each item split proportionally to normalized values.

    x[i][j] = w[i][j] / sum_l w[l][j] with w the L1 normalization.  The
    resulting normalized utility of agent i is exactly
    (1 + CHI2(w_i || S)) / n where S is the per-item average of the rows;
    reported on the diagonal of the bounds matrix.
    """
    if instance.kind != "goods":
        raise UnsupportedScopeError("trading_post is a goods mechanism")
    _unit_scope(instance, "trading_post")
    n, m = instance.d, instance.t
    w = l1_normalized(instance)
    column_sums = w.sum(axis=0)
    if np.any(column_sums == 0.0):
        dead = int(np.argmin(column_sums))
        raise UndefinedShareError(f"item {dead} has zero total normalized value")
    shares = w / column_sums

    mean_row = column_sums / n
    bounds = np.zeros((n, n))
    for i in range(n):
        chi2 = divergence("CHI2", w[i], mean_row)
        bounds[i, i] = (1.0 + chi2) / n

    return MechanismOutput(
        name="trading-post",
        allocation=FractionalAllocation(shares=shares, complete=True),
        analytic_bounds=bounds,
        details={"mean_row": mean_row},
    )


def inverse_trading_post(instance: Instance) -> MechanismOutput:
    """Each chore split proportionally to reciprocals of normalized costs.

    x[i][j] = (1/c[i][j]) / sum_l (1/c[l][j]).  Every agent's normalized
    cost is identical and equals sum_j H_j / n, where H_j is the harmonic
    mean of column j; equivalently (1 - penalty/n)/n with
    penalty = sum_l sum_j (c[l][j]-H_j)^2 / c[l][j].
    """
    if instance.kind != "chores":
        raise UnsupportedScopeError("inverse_trading_post is a chores mechanism")
    _unit_scope(instance, "inverse_trading_post")
    n, m = instance.d, instance.t
    c = l1_normalized(instance)
    inv = 1.0 / c
    inv_sums = inv.sum(axis=0)
    shares = inv / inv_sums

    harmonic = n / inv_sums  # H_j per item
    penalty = float((((c - harmonic) ** 2) / c).sum())
    normalized_cost = (1.0 - penalty / n) / n
    bounds = np.full((n, n), 0.0)
    np.fill_diagonal(bounds, normalized_cost)

    return MechanismOutput(
        name="inverse-trading-post",
        allocation=FractionalAllocation(shares=shares, complete=True),
        analytic_bounds=bounds,
        details={"harmonic_means": harmonic, "penalty": penalty},
    )
