import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lbtgame.model import (Allocation, DefenderMix, FixedLocks, GameSpec,
                           LockConfig, Signal, SpecError, all_signals,
                           damage_given_locks, explosion_prob, k_subsets,
                           validate_spec)


@pytest.mark.parametrize("u,p,expected", [(0, 0.7, 0.0), (1, 0.7, 0.7), (3, 0.5, 0.875)])
def test_explosion_prob_examples(u, p, expected):
    assert explosion_prob(u, p) == pytest.approx(expected, abs=1e-15)


def test_explosion_prob_rejects_negative():
    with pytest.raises(SpecError):
        explosion_prob(-1, 0.5)


@given(st.floats(0.01, 0.99))
def test_explosion_increments_shrink(p):
    prev = None
    for u in range(21):
        inc = explosion_prob(u + 1, p) - explosion_prob(u, p)
        assert inc == pytest.approx(p * (1 - p) ** u, rel=1e-9, abs=1e-15)
        if (1 - p) ** (u + 1) < 1e-10:
            break  # increments now below double resolution
        assert inc > 0
        if prev is not None:
            assert inc < prev
        prev = inc


@pytest.mark.parametrize("locks,u,c,p,expected", [
    ((1,), (5, 0), (4, 1), 1.0, 0.0),
    ((1,), (0, 1), (4, 1), 1.0, 1.0),
    ((2,), (2, 1), (2, 1), 0.5, 1.5),
])
def test_damage_examples(locks, u, c, p, expected):
    assert damage_given_locks(LockConfig(locks), Allocation(u), c, p) == pytest.approx(expected)


@settings(max_examples=60)
@given(st.integers(2, 6).flatmap(lambda n: st.tuples(
    st.just(n),
    st.lists(st.integers(0, 5), min_size=n, max_size=n),
    st.lists(st.floats(0.1, 10), min_size=n, max_size=n),
    st.sets(st.integers(1, n), min_size=1, max_size=n - 1),
    st.floats(0, 1),
    st.integers(0, 9))))
def test_damage_ignores_locked_bombs(case):
    n, u, c, locked, p, extra = case
    cfg = LockConfig(tuple(sorted(locked)))
    base = damage_given_locks(cfg, u, c, p)
    bumped = list(u)
    bumped[min(locked) - 1] += extra
    assert damage_given_locks(cfg, bumped, c, p) == base
    assert base <= sum(c[i] for i in range(n) if i + 1 not in cfg) + 1e-12


def test_validate_broadcasts_scalars():
    spec = validate_spec(GameSpec(2, FixedLocks(1), 1, 0.75, 0.75, (1, 1), 1.0))
    assert spec.a == (0.75, 0.75) and spec.b == (0.75, 0.75)
    assert spec.symmetric


def test_validate_rejects_k_equal_n():
    with pytest.raises(SpecError, match="k must be < n"):
        GameSpec.fixed(2, 2, 1, 0.75, 0.75)


def test_unequal_values_are_not_symmetric():
    spec = GameSpec.fixed(3, 1, 1, (0.5,) * 3, (0.5,) * 3, (4, 3, 2))
    assert not spec.symmetric


def test_validate_collects_every_problem():
    with pytest.raises(SpecError) as err:
        GameSpec.fixed(3, 1, -1, 1.5, (0.5, 0.5), 0.0, 2.0)
    fields = {f for f, _ in err.value.problems}
    assert {"m", "a", "b", "c", "p"} <= fields


def test_iid_spec_has_no_k():
    spec = GameSpec.iid(3, 0.2, 1, 0.8, 0.8)
    assert not spec.is_fixed
    with pytest.raises(SpecError):
        spec.k


def test_signal_round_trip():
    for n in range(1, 6):
        for s in all_signals(n):
            assert Signal.from_index(s.index, n) == s
            assert Signal.parse(str(s)) == s
    assert Signal.parse("-+").minus_count == 1


def test_lock_config_is_one_based():
    cfg = LockConfig((2, 3))
    assert str(cfg) == "{2,3}"
    assert list(cfg.mask(4)) == [False, True, True, False]
    with pytest.raises(SpecError):
        cfg.check(2)


def test_mix_validation():
    with pytest.raises(SpecError):
        DefenderMix(((1,), (1,)), (0.5, 0.5))
    with pytest.raises(SpecError):
        DefenderMix(((1,), (2,)), (0.5, 0.6))
    mix = DefenderMix.uniform(4, 2)
    assert len(mix.configs) == 6
    assert mix.lock_marginals(4).sum() == pytest.approx(2.0)


def test_iid_mix_marginals():
    mix = DefenderMix.iid(4, 0.3)
    np.testing.assert_allclose(mix.lock_marginals(4), 0.3, atol=1e-12)


def test_k_subsets_lexicographic():
    assert [c.sites for c in k_subsets(3, 2)] == [(1, 2), (1, 3), (2, 3)]
    assert len(k_subsets(6, 3)) == math.comb(6, 3)
