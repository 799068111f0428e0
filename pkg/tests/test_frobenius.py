"""Decomposition into nonnegative combinations of group sizes.

The oracle below is an independent forward-reachability DP over sets; the
library uses a different construction, so agreement is meaningful.
"""

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairdiv import decompose, is_representable, thresholds
from fairdiv.errors import InstanceError


def reachable_set(sizes, limit):
    """All sums of nonnegative combinations of `sizes` up to `limit`."""
    seen = {0}
    frontier = [0]
    while frontier:
        base = frontier.pop()
        for s in sizes:
            nxt = base + s
            if nxt <= limit and nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return seen


FAMILIES = [(5, 7), (3,), (4, 6), (6, 10, 15), (2, 3)]


@pytest.mark.parametrize("sizes", FAMILIES)
def test_matches_reachability_oracle(sizes):
    th = thresholds(sizes)
    limit = 5 * th.theta + 100
    oracle = reachable_set(sizes, limit)
    for k in range(limit + 1):
        dec = decompose(sizes, k)
        if k in oracle:
            assert dec is not None, (sizes, k)
            assert sum(c * s for c, s in zip(dec.coefficients, sizes)) == k
            assert all(c >= 0 for c in dec.coefficients)
        else:
            assert dec is None, (sizes, k)
        assert is_representable(sizes, k) == (k in oracle)


@pytest.mark.parametrize("sizes", FAMILIES)
def test_above_threshold_always_representable(sizes):
    th = thresholds(sizes)
    for k in range(th.theta, 5 * th.theta + 101):
        if k % th.g == 0:
            assert decompose(sizes, k) is not None, (sizes, k)


def test_lexicographically_smallest():
    # 24 = 2*5 + 2*7, but also 24 = 2*12... with sizes (5,7) the smallest
    # leading coefficient wins: (2, 2) beats nothing smaller since
    # 0*5 -> 24 % 7 != 0, 1*5 -> 19 % 7 != 0.
    dec = decompose((5, 7), 24)
    assert dec.coefficients == (2, 2)
    # 35 admits (0, 5) and (7, 0); lex order prefers the smaller first slot
    dec = decompose((5, 7), 35)
    assert dec.coefficients == (0, 5)


def test_zero_is_empty_combination():
    dec = decompose((5, 7), 0)
    assert dec is not None
    assert dec.coefficients == (0, 0)


def test_coefficients_align_with_given_order():
    # coefficients refer to the sizes exactly as passed
    a = decompose((7, 5), 10)
    assert a.coefficients == (0, 2)
    b = decompose((5, 7), 10)
    assert b.coefficients == (2, 0)


def test_invalid_inputs():
    with pytest.raises(InstanceError):
        decompose((0, 5), 10)
    with pytest.raises(InstanceError):
        decompose((), 10)
    with pytest.raises(InstanceError):
        decompose((5, 7), -1)


def test_total_helper():
    dec = decompose((5, 7), 24)
    assert dec.total((5, 7)) == 24


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.integers(1, 12), min_size=1, max_size=4),
    st.integers(0, 400),
)
def test_resum_property(sizes, k):
    dec = decompose(sizes, k)
    if dec is not None:
        assert sum(c * s for c, s in zip(dec.coefficients, sizes)) == k
    else:
        # the DP must agree that k is unreachable
        assert k not in reachable_set(sizes, k)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(1, 12), min_size=1, max_size=4))
def test_theta_boundary_property(sizes):
    th = thresholds(sizes)
    for k in range(th.theta, th.theta + 3 * max(sizes)):
        if k % th.g == 0:
            assert is_representable(sizes, k)
