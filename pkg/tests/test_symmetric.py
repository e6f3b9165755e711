import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lbtgame.model import SpecError
from lbtgame.oracle import exhaustive_symmetric_value
from lbtgame.symmetric import (depth, strategy_value, uap_allocate, value,
                               value_given_x)


def test_depth_examples():
    dep = depth(9.0, 0.5)
    assert (dep.d, dep.tie) == (4, False)
    for r in (0.5, 1.0, 9.0, 1e6):
        assert depth(r, 1.0).d == 1


def test_depth_unit_ratio_is_a_tie():
    # r = 1 makes the first minus bomb and the first plus bomb equally good
    dep = depth(1.0, 0.3)
    assert dep.d == 1
    assert dep.tie


def test_depth_exact_tie_survives_rounding():
    dep = depth(4.0, 0.5)
    assert (dep.d, dep.tie) == (3, True)
    dep = depth(1.0 / 0.7 ** 2, 0.3)
    assert (dep.d, dep.tie) == (3, True)


def test_depth_rejects_infinite_ratio():
    with pytest.raises(SpecError):
        depth(float("inf"), 0.5)


@given(st.floats(1.0, 1e6), st.floats(0.01, 1.0))
def test_depth_is_least_index(r, p):
    dep = depth(r, p)
    q = 1.0 - p
    assert r * q ** dep.d < 1.0
    if dep.d > 1 and not dep.tie:
        assert r * q ** (dep.d - 1) >= 1.0


def test_uap_examples():
    lay = uap_allocate(5, 3, 10, 2)
    assert (lay.l_minus, lay.e_minus, lay.l_plus, lay.e_plus) == (2, 2, 1, 0)
    assert (lay.m_minus, lay.m_plus) == (8, 2)
    assert lay.minus_levels == (3, 3, 2) and lay.plus_levels == (1, 1)
    assert sorted(uap_allocate(4, 0, 6, 3).plus_levels, reverse=True) == [2, 2, 1, 1]
    lay = uap_allocate(2, 1, 1, 1)
    assert (lay.l_minus, lay.e_minus, lay.l_plus, lay.e_plus) == (1, 0, 0, 0)


def test_uap_invariants_exhaustive():
    for n in range(1, 11):
        for x in range(n + 1):
            for m in range(51):
                for d in range(1, 7):
                    lay = uap_allocate(n, x, m, d)
                    assert lay.m == m
                    assert lay.invariant_violations() == [], (n, x, m, d)


def test_site_allocation_puts_extras_first():
    lay = uap_allocate(5, 3, 10, 2)
    assert lay.site_allocation((1, 0, 0, 1, 0)) == (1, 3, 3, 1, 2)


def test_value_examples():
    q = 0.75
    assert value_given_x(2, 1, 1, 1, q, q, 1.0).value == pytest.approx(0.9)
    assert value_given_x(2, 1, 1, 0, q, q, 1.0).value == pytest.approx(0.5)
    assert value(2, 1, 1, q, q, 1.0).value == pytest.approx(0.75, abs=1e-15)
    assert value(2, 1, 2, q, q, 1.0).value == pytest.approx(1.0, abs=1e-15)
    assert value(5, 2, 0, 0.7, 0.8, 0.4).value == 0.0


def test_perfect_testing_skips_impossible_counts():
    res = value(3, 1, 2, 1.0, 1.0, 1.0)
    assert res.per_x[1] is None
    assert res.value == pytest.approx(2.0)


def test_reference_layout_matches_enumeration():
    xv = value_given_x(5, 2, 10, 3, 0.75, 0.75, 0.5)
    assert xv.value == pytest.approx(exhaustive_symmetric_value(5, 2, 10, 3, 0.75, 0.75, 0.5), abs=1e-12)


def test_uninformative_tests_mirror_cleanly():
    # a + b < 1 flips which group is likelier unlocked
    for x in range(5):
        xv = value_given_x(4, 1, 5, x, 0.3, 0.4, 0.6)
        assert xv.value == pytest.approx(exhaustive_symmetric_value(4, 1, 5, x, 0.3, 0.4, 0.6), abs=1e-12)


def test_tie_move_keeps_value():
    n, k, x, a, b, p, m = 2, 1, 1, 2 / 3, 2 / 3, 0.5, 3
    xv = value_given_x(n, k, m, x, a, b, p)
    assert xv.tie and xv.d == 3
    outcomes = (0, 1)
    canon = xv.layout.site_allocation(outcomes)
    assert canon == (3, 0)
    moved = (2, 1)
    v0 = strategy_value(outcomes, canon, xv.p_minus, xv.p_plus, p)
    v1 = strategy_value(outcomes, moved, xv.p_minus, xv.p_plus, p)
    assert v0 == pytest.approx(xv.value, abs=1e-12)
    assert v1 == pytest.approx(v0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 6), st.data(), st.floats(0.55, 0.95), st.floats(0.55, 0.95),
       st.floats(0.1, 1.0), st.integers(0, 12))
def test_permutations_within_groups_keep_value(n, data, a, b, p, m):
    k = data.draw(st.integers(1, n - 1))
    x = data.draw(st.integers(1, n - 1))
    xv = value_given_x(n, k, m, x, a, b, p)
    outcomes = (0,) * x + (1,) * (n - x)
    bombs = xv.layout.site_allocation(outcomes)
    base = strategy_value(outcomes, bombs, xv.p_minus, xv.p_plus, p)
    minus, plus = bombs[:x], bombs[x:]
    for pm in set(itertools.permutations(minus)):
        for pp in set(itertools.permutations(plus)):
            assert strategy_value(outcomes, pm + pp, xv.p_minus, xv.p_plus, p) == pytest.approx(base, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.data(), st.floats(0.55, 0.95), st.floats(0.55, 0.95),
       st.floats(0.05, 1.0))
def test_monotone_in_bombs(n, data, a, b, p):
    k = data.draw(st.integers(1, n - 1))
    prev = value(n, k, 0, a, b, p)
    for m in range(1, 15):
        cur = value(n, k, m, a, b, p)
        assert cur.value >= prev.value - 1e-12
        for xv0, xv1 in zip(prev.per_x, cur.per_x):
            if xv0 is not None:
                assert xv1.value >= xv0.value - 1e-12
        prev = cur


@pytest.mark.parametrize("n,k,a,b,p", [(2, 1, 0.75, 0.75, 0.5), (3, 1, 0.6, 0.9, 0.3),
                                       (4, 2, 0.9, 0.6, 0.9), (5, 3, 0.75, 0.9, 0.5)])
def test_saturation(n, k, a, b, p):
    for m in (0, 1, 5, 20):
        assert value(n, k, m, a, b, p).value <= n - k + 1e-12
    assert value(n, k, 200, a, b, p).value > n - k - 1e-6


@pytest.mark.parametrize("n,k", [(3, 1), (4, 2)])
def test_matches_enumeration_small(n, k):
    for m in range(6):
        for x in range(n + 1):
            got = value_given_x(n, k, m, x, 0.8, 0.7, 0.45).value
            assert got == pytest.approx(exhaustive_symmetric_value(n, k, m, x, 0.8, 0.7, 0.45), abs=1e-12)
