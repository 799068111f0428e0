"""Existence conditions, copy bounds, discretization plans, scalar lemmas."""

import math
from fractions import Fraction

import pytest

from fairdiv import (
    Instance,
    cake_epsilon,
    copies_slack_chores,
    copies_slack_goods,
    dilution_slack_log,
    dilution_slack_squared,
    ef_condition_chores,
    ef_condition_goods,
    mu_bound_chores,
    mu_bound_goods,
    prop_condition,
    tefx_condition,
)
from fairdiv.errors import InstanceError, UnsupportedScopeError


def orthogonal(k=8, kind="goods"):
    return Instance([1, 1], [k, k], [[1, 0], [0, 1]], kind)


# ---------------------------------------------------------------------------
# ef_condition_goods


def test_ef_goods_orthogonal_eight_copies():
    rep = ef_condition_goods(orthogonal(8))
    # rows are (1/sqrt(8), 0) and (0, 1/sqrt(8)); weighted distance^2 = 2;
    # loss constant = 2, so the threshold is sqrt(2 / 8) = 0.5
    assert rep.lhs == pytest.approx(1 / math.sqrt(8), abs=1e-12)
    assert rep.threshold == pytest.approx(0.5, abs=1e-12)
    assert rep.satisfied
    assert rep.margin > 0
    assert rep.direction == "<="
    assert rep.details["copies_ok"]


def test_ef_goods_fails_at_single_copies():
    rep = ef_condition_goods(orthogonal(1))
    # lhs = 1 while the threshold stays 0.5
    assert rep.lhs == pytest.approx(1.0, abs=1e-12)
    assert not rep.satisfied
    assert rep.margin < 0


def test_ef_goods_single_group_vacuous():
    rep = ef_condition_goods(Instance([3], [5], [[2]], "goods"))
    assert rep.satisfied
    assert rep.threshold == math.inf
    assert rep.details["vacuous"]


def test_ef_goods_scope():
    with pytest.raises(UnsupportedScopeError):
        ef_condition_goods(Instance([1, 1], [2, 2], [[1, 2], [2, 1]], "chores"))


def test_ef_goods_identical_rows_zero_threshold():
    inst = Instance([1, 1], [4, 4], [[2, 3], [2, 3]], "goods")
    rep = ef_condition_goods(inst)
    assert rep.threshold == pytest.approx(0.0, abs=1e-12)
    assert not rep.satisfied


# ---------------------------------------------------------------------------
# ef_condition_chores


def test_ef_chores_hand_computed():
    inst = Instance([1, 1], [1, 1], [[1, 2], [2, 1]], "chores")
    rep = ef_condition_chores(inst)
    # rows (1/3, 2/3) and (2/3, 1/3); KL = ln(2)/3 both ways; lambda = 8
    min_kl = math.log(2) / 3
    assert rep.lhs == pytest.approx(2 / 3, abs=1e-12)
    assert rep.threshold == pytest.approx(min_kl / (8 * math.log(3)), rel=1e-12)
    assert not rep.satisfied
    assert rep.details["min_kl"] == pytest.approx(min_kl, rel=1e-12)


def test_ef_chores_single_group_vacuous():
    rep = ef_condition_chores(Instance([2], [4], [[3]], "chores"))
    assert rep.satisfied
    assert rep.threshold == math.inf


def test_ef_chores_scope():
    with pytest.raises(UnsupportedScopeError):
        ef_condition_chores(orthogonal(2))
    with pytest.raises(UnsupportedScopeError):
        ef_condition_chores(Instance([1, 1], [1], [[2], [3]], "chores"))


# ---------------------------------------------------------------------------
# mu bounds


def test_mu_goods_orthogonal():
    rep = mu_bound_goods(orthogonal(1))
    # unit-copy distance^2 = 2; numerator = 2*2*(4 + 0) = 16; raw = 8
    assert rep.mu_bound == 8
    assert rep.threshold == 8.0
    assert rep.direction == ">="
    assert not rep.satisfied  # only one copy present
    assert mu_bound_goods(orthogonal(8)).satisfied


def test_mu_goods_rounds_to_gcd_multiple():
    inst = Instance([4, 6], [2, 2], [[1, 0], [0, 1]], "goods")
    rep = mu_bound_goods(inst)
    # g = 2, theta = 4; numerator = 2*10*(4 + 2*(4+10+6-2-1)) = 760; raw = 380
    assert rep.details["numerator"] == 760
    assert rep.mu_bound == 380
    assert rep.mu_bound % 2 == 0


def test_mu_goods_identical_rows_unbounded():
    inst = Instance([1, 1], [3, 3], [[1, 2], [2, 4]], "goods")
    rep = mu_bound_goods(inst)
    assert not rep.satisfied
    assert rep.threshold == math.inf
    assert rep.details["unbounded"]
    assert rep.mu_bound is None


def test_mu_goods_theta_floor():
    # near-orthogonal large values drive the raw bound below theta
    inst = Instance([5, 7], [24, 24], [[1, 0], [0, 1]], "goods")
    rep = mu_bound_goods(inst)
    assert rep.mu_bound >= 24
    assert rep.mu_bound % 1 == 0


def test_mu_chores_hand_computed():
    inst = Instance([1, 1], [1, 1], [[1, 2], [2, 1]], "chores")
    rep = mu_bound_chores(inst)
    min_kl = math.log(2) / 3
    lam = 8
    raw = (
        2
        * (2 + (2.5 * 2 + lam - 1) * math.log(3) + lam * (math.log(2 * lam / min_kl) - 1))
        / min_kl
    )
    assert rep.details["raw_bound"] == pytest.approx(raw, rel=1e-12)
    assert rep.mu_bound == math.ceil(raw)
    assert not rep.details["log_term_negative"]


def test_mu_chores_identical_rows_unbounded():
    inst = Instance([1, 1], [1, 1], [[2, 3], [4, 6]], "chores")
    rep = mu_bound_chores(inst)
    assert not rep.satisfied
    assert rep.details["unbounded"]


def test_mu_scope():
    with pytest.raises(UnsupportedScopeError):
        mu_bound_goods(Instance([1, 1], [2, 2], [[1, 2], [2, 1]], "chores"))
    with pytest.raises(UnsupportedScopeError):
        mu_bound_chores(orthogonal(2))


# ---------------------------------------------------------------------------
# prop_condition


def test_prop_goods_boundary_case():
    inst = Instance([1, 1], [1] * 4, [[1, 1, 0, 0], [0, 0, 1, 1]], "goods")
    rep = prop_condition(inst)
    # chi-square from the society row is 1 for both agents; lhs = 1/2
    assert rep.condition == "prop-goods"
    assert rep.lhs == pytest.approx(0.5, abs=1e-12)
    assert rep.threshold == pytest.approx(0.5, abs=1e-12)
    assert rep.satisfied
    assert not rep.details["strict"]


def test_prop_goods_strict_with_more_items():
    rows = [[1] * 4 + [0] * 4, [0] * 4 + [1] * 4]
    rep = prop_condition(Instance([1, 1], [1] * 8, rows, "goods"))
    assert rep.satisfied
    assert rep.details["strict"]
    assert rep.lhs == pytest.approx(0.25, abs=1e-12)


def test_prop_goods_identical_agents_fail():
    rep = prop_condition(Instance([1, 1], [1, 1], [[1, 2], [1, 2]], "goods"))
    assert rep.threshold == pytest.approx(0.0, abs=1e-12)
    assert not rep.satisfied


def test_prop_chores_hand_computed():
    rep = prop_condition(Instance([1, 1], [1, 1], [[1, 3], [3, 1]], "chores"))
    # rows (1/4, 3/4), (3/4, 1/4); harmonic means 3/8; penalty = 1/2
    assert rep.condition == "prop-chores"
    assert rep.details["penalty"] == pytest.approx(0.5, abs=1e-12)
    assert rep.threshold == pytest.approx(0.125, abs=1e-12)
    assert rep.lhs == pytest.approx(0.75, abs=1e-12)
    assert not rep.satisfied


def test_prop_scope():
    with pytest.raises(UnsupportedScopeError):
        prop_condition(Instance([2, 1], [1, 1], [[1, 2], [2, 1]], "goods"))
    with pytest.raises(UnsupportedScopeError):
        prop_condition(Instance([1, 1], [2, 1], [[1, 2], [2, 1]], "goods"))


# ---------------------------------------------------------------------------
# tefx_condition


def test_tefx_near_identical_agents():
    inst = Instance([1, 1], [1, 1], [[100, 101], [101, 100]], "goods")
    rep = tefx_condition(inst)
    assert rep.details["max_tv"] == pytest.approx(1 / 201, rel=1e-12)
    assert rep.lhs == pytest.approx(100 / 201, rel=1e-12)
    assert rep.threshold == pytest.approx(8 / 201, rel=1e-12)
    assert rep.satisfied


def test_tefx_identical_agents_trivial():
    rep = tefx_condition(Instance([1, 1], [1, 1], [[2, 3], [2, 3]], "goods"))
    assert rep.threshold == 0.0
    assert rep.satisfied


def test_tefx_orthogonal_fails():
    rep = tefx_condition(orthogonal(1))
    assert rep.details["max_tv"] == pytest.approx(1.0, abs=1e-12)
    assert not rep.satisfied


def test_tefx_scope():
    with pytest.raises(UnsupportedScopeError):
        tefx_condition(Instance([1, 1], [1, 1], [[1, 2], [2, 1]], "chores"))
    with pytest.raises(UnsupportedScopeError):
        tefx_condition(Instance([1, 1], [2, 2], [[1, 0], [0, 1]], "goods"))


# ---------------------------------------------------------------------------
# cake_epsilon


def test_cake_epsilon_two_agents_unit_constants():
    plan = cake_epsilon(2, 1.0, 1.0)
    assert plan.pieces == 7
    assert plan.epsilon == Fraction(1, 7)
    assert plan.query_budget == 14
    assert plan.density_bound == 2.0


def test_cake_epsilon_respects_lipschitz_cap():
    plan = cake_epsilon(2, 4.0, 100.0)
    # width can never exceed 1/k even with huge separation
    assert plan.epsilon <= Fraction(1, 4)
    assert plan.density_bound == pytest.approx(32 ** (1 / 3), rel=1e-12)


def test_cake_epsilon_smaller_separation_finer_cuts():
    coarse = cake_epsilon(3, 2.0, 0.5)
    fine = cake_epsilon(3, 2.0, 0.005)
    assert fine.pieces > coarse.pieces
    assert fine.epsilon == Fraction(1, fine.pieces)


@pytest.mark.parametrize("n,k,dlt", [(1, 1.0, 1.0), (2, 0.0, 1.0), (2, 1.0, 0.0), (2, -2.0, 1.0)])
def test_cake_epsilon_invalid(n, k, dlt):
    with pytest.raises(InstanceError):
        cake_epsilon(n, k, dlt)


# ---------------------------------------------------------------------------
# scalar dilution inequalities


def test_dilution_slack_squared_spot():
    # unconditional regime: b <= 1, x past the a(b+1)/(2b) edge
    for a, b in [(1.0, 1.0), (0.5, 0.8), (3.0, 0.25)]:
        x0 = a * (b + 1) / (2 * b)
        for mult in (1.0, 1.5, 4.0, 50.0):
            assert dilution_slack_squared(x0 * mult, a, b) >= -1e-9


def test_dilution_slack_squared_window_above_one():
    # for 1 < b <= 2 the bound holds only up to x = a(b+1)/(4(b-1))
    a, b = 0.5, 2.0
    lo = a * (b + 1) / (2 * b)
    hi = a * (b + 1) / (4 * (b - 1))
    for x in (lo, 0.5 * (lo + hi), hi):
        assert dilution_slack_squared(x, a, b) >= -1e-9
    # past the window the inequality genuinely fails; keep grids inside it
    assert dilution_slack_squared(1.5, a, b) < -0.5


def test_dilution_slack_squared_zero_a():
    # with a = 0 both sides collapse to b^2 x
    assert dilution_slack_squared(3.0, 0.0, 2.0) == pytest.approx(0.0, abs=1e-12)


def test_dilution_slack_log_spot():
    for a, b, c in [(1.0, 1.0, 1.0), (2.0, 0.5, 3.0), (0.5, 2.0, 0.0)]:
        for x in (1.0, 4.0, 30.0, 500.0):
            assert dilution_slack_log(x, a, b, c) >= -1e-9


def test_copies_slack_goods_nonnegative():
    inst = Instance([1, 1], [10, 200], [[5, 1], [1, 9]], "goods")
    assert copies_slack_goods(inst) >= -1e-9
    assert copies_slack_goods(inst, alpha=10, beta=200) >= -1e-9


def test_copies_slack_chores_nonnegative():
    inst = Instance([1, 1], [10, 200], [[5, 1], [1, 9]], "chores")
    assert copies_slack_chores(inst) >= -1e-9


def test_copies_slack_range_validation():
    inst = Instance([1, 1], [10, 200], [[5, 1], [1, 9]], "goods")
    with pytest.raises(InstanceError):
        copies_slack_goods(inst, alpha=20, beta=200)


def test_copies_slack_single_group_inf():
    inst = Instance([2], [10], [[5]], "goods")
    assert copies_slack_goods(inst) == math.inf
