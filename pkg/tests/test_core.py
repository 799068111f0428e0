"""Instance model, normalizations, divergences, and exact verification."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairdiv import (
    FractionalAllocation,
    Instance,
    IntegralAllocation,
    divergence,
    efx_holds,
    gap_report,
    is_complete,
    l1_normalized,
    l2_normalized,
    normalize,
    thresholds,
    verify,
)
from fairdiv.errors import (
    DegenerateAgentError,
    DivergenceUndefinedError,
    InstanceError,
    UnsupportedScopeError,
)


def unit_goods(rows):
    m = len(rows[0])
    return Instance([1] * len(rows), [1] * m, rows, "goods")


# ---------------------------------------------------------------------------
# Instance construction


def test_groups_sorted_ascending_with_rows():
    inst = Instance([7, 5], [1, 1], [["1", "2"], ["3", "4"]], "goods")
    assert inst.group_sizes == (5, 7)
    # The size-5 group's row travels with it.
    assert inst.values[0] == (Fraction(3), Fraction(4))
    assert inst.values[1] == (Fraction(1), Fraction(2))


def test_sort_is_stable_for_equal_sizes():
    inst = Instance([2, 2], [1], [["1"], ["2"]], "goods")
    assert inst.values == ((Fraction(1),), (Fraction(2),))


def test_dimension_counts():
    inst = Instance([1, 2, 3], [4, 5], [[1, 2]] * 3, "goods")
    assert (inst.d, inst.t, inst.n, inst.m) == (3, 2, 6, 9)


@pytest.mark.parametrize(
    "sizes,copies,values,kind",
    [
        ([], [1], [], "goods"),
        ([1], [], [[]], "goods"),
        ([0], [1], [[1]], "goods"),
        ([1], [0], [[1]], "goods"),
        ([1], [1], [[1], [2]], "goods"),
        ([1], [1, 1], [[1]], "goods"),
        ([1], [1], [[-1]], "goods"),
        ([1], [1], [[0]], "chores"),
        ([1], [1], [[1]], "stuff"),
    ],
)
def test_invalid_instances_rejected(sizes, copies, values, kind):
    with pytest.raises(InstanceError):
        Instance(sizes, copies, values, kind)


def test_goods_zero_row_is_degenerate():
    with pytest.raises(DegenerateAgentError):
        Instance([1, 1], [1, 1], [[0, 0], [1, 1]], "goods")


def test_values_parsed_exactly():
    inst = Instance([1], [1, 1], [["1/3", 2]], "goods")
    assert inst.values[0] == (Fraction(1, 3), Fraction(2))


def test_bundle_and_total_value():
    inst = Instance([1], [2, 3], [["1/2", "1/3"]], "goods")
    assert inst.bundle_value(0, [1, 2]) == Fraction(1, 2) + Fraction(2, 3)
    assert inst.total_value(0) == Fraction(2, 2) + Fraction(3, 3)
    # memoized value stays correct on repeat
    assert inst.total_value(0) == Fraction(2)


def test_unit_copies_profile():
    inst = Instance([1, 2], [4, 9], [[1, 2], [3, 4]], "goods")
    unit = inst.unit_copies()
    assert unit.type_copies == (1, 1)
    assert unit.values == inst.values


# ---------------------------------------------------------------------------
# Thresholds


@pytest.mark.parametrize(
    "sizes,g,theta",
    [
        ((5, 7), 1, 24),
        ((3,), 3, 0),
        ((4, 6), 2, 4),
        ((6, 10, 15), 1, 70),
        ((2, 3), 1, 2),
        ((2, 2), 2, 0),
    ],
)
def test_thresholds_values(sizes, g, theta):
    th = thresholds(sizes)
    assert (th.g, th.theta) == (g, theta)
    assert th.theta % th.g == 0


def test_thresholds_rejects_nonpositive():
    with pytest.raises(InstanceError):
        thresholds([3, 0])


# ---------------------------------------------------------------------------
# Normalization


def test_l1_normalization_copy_weighted():
    inst = Instance([1], [2, 3], [[1, 2]], "goods")
    row = normalize(inst, 0, "L1")
    # copy-weighted sum is 1*2 + 2*3 = 8
    assert row == pytest.approx([1 / 8, 2 / 8], abs=1e-15)
    assert float(np.dot(inst.copies_array(), row)) == pytest.approx(1.0, abs=1e-12)


def test_l2_normalization_copy_weighted():
    inst = Instance([1], [2, 3], [[1, 2]], "goods")
    row = normalize(inst, 0, "L2")
    # copy-weighted square sum is 2*1 + 3*4 = 14
    assert row == pytest.approx([1 / math.sqrt(14), 2 / math.sqrt(14)], abs=1e-15)
    assert float(np.dot(inst.copies_array(), row**2)) == pytest.approx(1.0, abs=1e-12)


def test_chores_l2_unsupported():
    inst = Instance([1], [1], [[1]], "chores")
    with pytest.raises(UnsupportedScopeError):
        normalize(inst, 0, "L2")
    with pytest.raises(UnsupportedScopeError):
        l2_normalized(inst)


def test_normalize_bad_group_and_norm():
    inst = Instance([1], [1], [[1]], "goods")
    with pytest.raises(InstanceError):
        normalize(inst, 5, "L1")
    with pytest.raises(UnsupportedScopeError):
        normalize(inst, 0, "L7")


def test_normalized_matrices_cached_and_readonly():
    inst = Instance([1, 1], [1, 1], [[1, 2], [3, 4]], "goods")
    a = l1_normalized(inst)
    assert l1_normalized(inst) is a
    with pytest.raises(ValueError):
        a[0, 0] = 5.0


@st.composite
def small_instances(draw, kind="goods"):
    d = draw(st.integers(1, 4))
    t = draw(st.integers(1, 5))
    sizes = draw(st.lists(st.integers(1, 6), min_size=d, max_size=d))
    copies = draw(st.lists(st.integers(1, 9), min_size=t, max_size=t))
    low = 1 if kind == "chores" else 0
    rows = draw(
        st.lists(
            st.lists(st.integers(low, 50), min_size=t, max_size=t).filter(
                lambda r: kind == "chores" or any(r)
            ),
            min_size=d,
            max_size=d,
        )
    )
    return Instance(sizes, copies, rows, kind)


@settings(max_examples=60, deadline=None)
@given(small_instances())
def test_l1_rows_unit_weighted_mass(inst):
    rows = l1_normalized(inst)
    k = inst.copies_array()
    for i in range(inst.d):
        assert float(np.dot(k, rows[i])) == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(small_instances())
def test_l2_rows_unit_weighted_energy(inst):
    rows = l2_normalized(inst)
    k = inst.copies_array()
    for i in range(inst.d):
        assert float(np.dot(k, rows[i] ** 2)) == pytest.approx(1.0, abs=1e-9)


# ---------------------------------------------------------------------------
# Divergences


def test_chi2_frozen_point():
    assert divergence("CHI2", (1, 0), (0.5, 0.5)) == pytest.approx(1.0, abs=1e-12)


def test_kl_frozen_point():
    assert divergence("KL", (1, 0), (0.5, 0.5)) == pytest.approx(math.log(2), abs=1e-12)


def test_tv_is_half_l1():
    assert divergence("TV", (1, 0), (0.5, 0.5)) == pytest.approx(0.5, abs=1e-15)


def test_divergence_rejects_bad_inputs():
    with pytest.raises(DivergenceUndefinedError):
        divergence("CHI2", (0.7, 0.2), (0.5, 0.5))  # does not sum to 1
    with pytest.raises(DivergenceUndefinedError):
        divergence("KL", (1, 0), (1, 0, 0))  # length mismatch
    with pytest.raises(DivergenceUndefinedError):
        divergence("CHI2", (0.5, 0.5), (1, 0))  # support violation
    with pytest.raises(DivergenceUndefinedError):
        divergence("XYZ", (1, 0), (0.5, 0.5))
    with pytest.raises(DivergenceUndefinedError):
        divergence("TV", (-0.5, 1.5), (0.5, 0.5))


def test_kl_zero_mass_convention():
    # 0 * log(0/q) contributes nothing.
    assert divergence("KL", (0, 1), (0.5, 0.5)) == pytest.approx(math.log(2), abs=1e-12)


@st.composite
def distribution_pairs(draw):
    size = draw(st.integers(2, 6))
    raw_p = draw(st.lists(st.integers(1, 40), min_size=size, max_size=size))
    raw_q = draw(st.lists(st.integers(1, 40), min_size=size, max_size=size))
    p = [x / sum(raw_p) for x in raw_p]
    q = [x / sum(raw_q) for x in raw_q]
    return p, q


@settings(max_examples=100, deadline=None)
@given(distribution_pairs())
def test_pinsker_inequality(pair):
    p, q = pair
    tv = divergence("TV", p, q)
    kl = divergence("KL", p, q)
    assert tv * tv <= kl / 2 + 1e-9


@settings(max_examples=100, deadline=None)
@given(distribution_pairs())
def test_kl_dominated_by_chi2(pair):
    p, q = pair
    kl = divergence("KL", p, q)
    chi2 = divergence("CHI2", p, q)
    assert kl <= math.log1p(chi2) + 1e-9
    assert kl <= chi2 + 1e-9


# ---------------------------------------------------------------------------
# Gap reports


def test_gap_report_exact_goods():
    inst = Instance([1, 1], [2, 2], [[3, 1], [1, 3]], "goods")
    alloc = IntegralAllocation([[2, 0], [0, 2]])
    report = gap_report(inst, alloc)
    assert report.exact
    assert report.pair_gaps[0][1] == Fraction(6 - 2)
    assert report.pair_gaps[1][0] == Fraction(6 - 2)
    assert report.min_gap == Fraction(4)
    assert report.pair_gaps[0][0] == 0


def test_gap_report_chores_orientation():
    inst = Instance([1, 1], [1, 1], [[1, 5], [5, 1]], "chores")
    alloc = IntegralAllocation([[1, 0], [0, 1]])
    report = gap_report(inst, alloc)
    # the other bundle costs 5, own costs 1
    assert report.pair_gaps[0][1] == Fraction(4)
    assert report.min_gap == Fraction(4)


def test_gap_report_fractional_float():
    inst = Instance([1, 1], [1, 1], [[1, 0], [0, 1]], "goods")
    frac = FractionalAllocation(np.array([[0.75, 0.25], [0.25, 0.75]]))
    report = gap_report(inst, frac)
    assert not report.exact
    assert report.pair_gaps[0][1] == pytest.approx(0.5, abs=1e-12)


def test_gap_report_single_group_has_no_min():
    inst = Instance([2], [2], [[1]], "goods")
    report = gap_report(inst, IntegralAllocation([[1]]))
    assert report.min_gap is None


def test_gap_report_rejects_oversupply():
    inst = Instance([1, 1], [1, 1], [[1, 1], [1, 1]], "goods")
    with pytest.raises(InstanceError):
        gap_report(inst, IntegralAllocation([[2, 0], [0, 1]]))


def test_gap_report_group_scaling():
    # group sizes scale the supply used per agent, not the per-agent gaps
    inst = Instance([2, 3], [10, 10], [[1, 0], [0, 1]], "goods")
    alloc = IntegralAllocation([[5, 0], [0, 2]])
    report = gap_report(inst, alloc)
    assert report.pair_gaps[0][1] == Fraction(5)
    assert report.pair_gaps[1][0] == Fraction(2)


# ---------------------------------------------------------------------------
# Exact verification


def test_verify_ef_holds_and_fails():
    inst = unit_goods([[3, 1], [1, 3]])
    good = IntegralAllocation([[1, 0], [0, 1]])
    assert verify(inst, good, "EF").holds
    bad = IntegralAllocation([[0, 1], [1, 0]])
    res = verify(inst, bad, "EF")
    assert not res.holds
    assert res.witness is not None and res.witness.group == 0
    assert res.witness.other == 1


def test_verify_strong_ef_needs_strict():
    inst = unit_goods([[1, 1], [1, 1]])
    alloc = IntegralAllocation([[1, 0], [0, 1]])
    assert verify(inst, alloc, "EF").holds
    assert not verify(inst, alloc, "STRONG_EF").holds


def test_verify_prop_goods_and_chores():
    inst = Instance([1, 1], [1, 1], [[4, 2], [2, 4]], "goods")
    alloc = IntegralAllocation([[1, 0], [0, 1]])
    # own=4 >= total 6 / n 2 = 3
    assert verify(inst, alloc, "PROP").holds
    assert verify(inst, alloc, "STRONG_PROP").holds
    chores = Instance([1, 1], [1, 1], [[4, 2], [2, 4]], "chores")
    calloc = IntegralAllocation([[0, 1], [1, 0]])
    assert verify(chores, calloc, "PROP").holds
    bad = IntegralAllocation([[1, 1], [0, 0]])
    assert not verify(chores, bad, "PROP").holds


def test_verify_prop_witness_is_diagonal():
    inst = unit_goods([[9, 1], [9, 1]])
    alloc = IntegralAllocation([[0, 1], [1, 0]])
    res = verify(inst, alloc, "PROP")
    assert not res.holds
    assert res.witness.group == res.witness.other == 0


def test_verify_tefx():
    # agent 0 envies group 1 by 2 with items worth 2 each: transfer repairs it
    inst = unit_goods([[2, 2, 2], [2, 2, 2]])
    alloc = IntegralAllocation([[1, 0, 0], [0, 1, 1]])
    assert verify(inst, alloc, "TEFX").holds


def test_verify_tefx_fails_on_small_item_in_big_bundle():
    # moving a large item fixes the envy, but moving the small one does not
    inst = unit_goods([[10, 10, 1, 1], [10, 10, 1, 1]])
    alloc = IntegralAllocation([[0, 0, 0, 1], [1, 1, 1, 0]])
    res = verify(inst, alloc, "TEFX")
    assert not res.holds
    assert res.witness.item_type == 2


def test_verify_tefx_chores_unsupported():
    inst = Instance([1], [1], [[1]], "chores")
    with pytest.raises(UnsupportedScopeError):
        verify(inst, IntegralAllocation([[1]]), "TEFX")


def test_verify_unknown_notion():
    inst = Instance([1], [1], [[1]], "goods")
    with pytest.raises(UnsupportedScopeError):
        verify(inst, IntegralAllocation([[1]]), "EFX")


def test_verify_requires_completeness():
    inst = Instance([1, 1], [2, 2], [[1, 1], [1, 1]], "goods")
    partial = IntegralAllocation([[1, 0], [0, 1]])
    assert not is_complete(inst, partial)
    with pytest.raises(InstanceError):
        verify(inst, partial, "EF")


def test_verify_group_multiplicity_counts():
    # both agents of the size-2 group take one copy of type 0 each
    inst = Instance([1, 2], [2, 1], [[1, 1], [1, 1]], "goods")
    alloc = IntegralAllocation([[0, 1], [1, 0]])
    assert is_complete(inst, alloc)
    assert verify(inst, alloc, "EF").holds


def test_efx_holds_and_witness():
    inst = unit_goods([[5, 5, 1], [5, 5, 1]])
    ok = IntegralAllocation([[1, 0, 1], [0, 1, 0]])
    assert efx_holds(inst, ok).holds
    # group 1 holds both large items; dropping one still leaves envy at 0
    bad = IntegralAllocation([[0, 0, 1], [1, 1, 0]])
    res = efx_holds(inst, bad)
    assert not res.holds


def test_efx_chores_unsupported():
    inst = Instance([1], [1], [[1]], "chores")
    with pytest.raises(UnsupportedScopeError):
        efx_holds(inst, IntegralAllocation([[1]]))
