"""Optimal bomb allocation when all sites share a, b and unit value.

Given ``x`` minus signals, minus sites are filled ``d`` layers ahead of
plus sites ("fill and switch"), where ``d`` is the depth at which a
minus-site bomb stops beating a fresh plus-site bomb.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .model import SpecError, explosion_prob
from .posterior import critical_ratio_A, minus_count_dist

TIE_TOL = 1e-12


@dataclass(frozen=True)
class Depth:
    d: int
    tie: bool


@dataclass(frozen=True)
class UapLayout:
    """Layered bomb counts for the minus group (size ``x``) and plus group.

    The first ``e_minus`` minus sites hold ``l_minus + 1`` bombs, the rest
    ``l_minus``; likewise for the plus group.
    """

    n: int
    x: int
    d: int
    l_minus: int
    e_minus: int
    l_plus: int
    e_plus: int

    @property
    def m_minus(self) -> int:
        return self.l_minus * self.x + self.e_minus

    @property
    def m_plus(self) -> int:
        return self.l_plus * (self.n - self.x) + self.e_plus

    @property
    def m(self) -> int:
        return self.m_minus + self.m_plus

    @property
    def minus_levels(self) -> tuple[int, ...]:
        return (self.l_minus + 1,) * self.e_minus + (self.l_minus,) * (self.x - self.e_minus)

    @property
    def plus_levels(self) -> tuple[int, ...]:
        g = self.n - self.x
        return (self.l_plus + 1,) * self.e_plus + (self.l_plus,) * (g - self.e_plus)

    def site_allocation(self, outcomes) -> tuple[int, ...]:
        """Per-site bomb counts for a concrete signal (lowest indices get extras)."""
        outcomes = tuple(outcomes)
        if len(outcomes) != self.n or outcomes.count(0) != self.x:
            raise SpecError([("signal", f"expected {self.n} sites with {self.x} minuses")])
        minus = iter(self.minus_levels)
        plus = iter(self.plus_levels)
        return tuple(next(plus) if o else next(minus) for o in outcomes)

    def invariant_violations(self) -> list[str]:
        bad = []
        x, n, d = self.x, self.n, self.d
        if 0 < x < n:
            if not 0 <= self.e_minus < x:
                bad.append("0 <= e_minus < x")
            if not 0 <= self.e_plus < n - x:
                bad.append("0 <= e_plus < n - x")
            if self.e_minus * self.e_plus != 0:
                bad.append("e_minus * e_plus == 0")
            if self.m_plus == 0 and self.m > d * x:
                bad.append("m <= d*x when plus sites are empty")
            if self.e_plus > 0 and (self.e_minus != 0 or self.l_minus - self.l_plus != d):
                bad.append("e_plus > 0 implies e_minus == 0 and l_minus - l_plus == d")
            if self.e_plus == 0 and self.l_plus > 0 and self.l_minus - self.l_plus not in (d - 1, d):
                bad.append("l_minus - l_plus in {d-1, d}")
            if self.l_minus - self.l_plus == d and self.l_plus > 0 and self.e_minus != 0:
                bad.append("e_minus == 0 when the lead equals d")
        return bad


def depth(r_x: float, p: float) -> Depth:
    """Least ``i >= 1`` with ``r_x * (1 - p)**i < 1``, plus a tie flag.

    Products within ``TIE_TOL`` of 1 count as equal to 1, so an exact tie
    rounded slightly below 1 still lands on the same depth; the flag marks
    ``r_x * (1 - p)**(d - 1) == 1``, where alternate optima exist.
    """
    if not 0.0 < p <= 1.0:
        raise SpecError([("p", "depth needs 0 < p <= 1")])
    if math.isinf(r_x) or math.isnan(r_x):
        raise SpecError([("r", "infinite critical ratio (perfect testing) has no depth")])
    if r_x <= 0:
        raise SpecError([("r", "critical ratio must be positive")])
    q = 1.0 - p
    if q == 0.0 or r_x <= 1.0:
        d = 1
    else:
        d = max(1, int(math.log(r_x) / -math.log(q)) - 1)
        while d > 1 and r_x * q ** (d - 1) < 1.0 - TIE_TOL:
            d -= 1
    while r_x * q ** d >= 1.0 - TIE_TOL:
        d += 1
    tie = abs(r_x * q ** (d - 1) - 1.0) <= TIE_TOL
    return Depth(d, tie)


def uap_allocate(n: int, x: int, m: int, d: int) -> UapLayout:
    """Fill-and-switch layout of ``m`` bombs with ``x`` minus sites."""
    if not 0 <= x <= n or m < 0 or d < 1:
        raise SpecError([("uap", f"invalid arguments n={n}, x={x}, m={m}, d={d}")])
    if x == n:
        return UapLayout(n, x, d, m // n, m % n, 0, 0)
    if x == 0:
        return UapLayout(n, x, d, 0, 0, m // n, m % n)
    if m <= d * x:
        return UapLayout(n, x, d, m // x, m % x, 0, 0)
    cycles, rem = divmod(m - d * x, n)
    l_minus, l_plus = d + cycles, cycles
    if rem < n - x:
        return UapLayout(n, x, d, l_minus, 0, l_plus, rem)
    return UapLayout(n, x, d, l_minus, rem - (n - x), l_plus + 1, 0)


def _group_sum(levels, p):
    return math.fsum(explosion_prob(u, p) for u in levels)


@dataclass(frozen=True)
class XValue:
    """Optimal value for one minus count.

    ``r`` is ``None`` when every signal agrees (``x`` is 0 or ``n``); ``d``
    is ``None`` when no finite depth applies (no minus/plus pair, perfect
    tests or ``p == 0``).
    """

    x: int
    value: float
    p_minus: float
    p_plus: float
    r: float | None
    d: int | None
    layout: UapLayout
    tie: bool


def _swap(layout: UapLayout, n: int, x: int) -> UapLayout:
    return UapLayout(n, x, layout.d, layout.l_plus, layout.e_plus,
                     layout.l_minus, layout.e_minus)


def value_given_x(n: int, k: int, m: int, x: int, a: float, b: float, p: float) -> XValue:
    """Optimal expected damage given a signal with ``x`` minuses."""
    if m < 0:
        raise SpecError([("m", "must be >= 0")])
    if x == 0 or x == n:
        minus_count_dist(n, k, a, b)  # argument validation
        layout = uap_allocate(n, x, m, 1)
        share = (n - k) / n
        levels = layout.minus_levels + layout.plus_levels
        return XValue(x, share * _group_sum(levels, p), share, share, None, None, layout, False)

    cr = critical_ratio_A(n, k, x, a, b)
    tie = False
    d = None
    if p == 0.0:
        layout = uap_allocate(n, x, m, 1)
    elif cr.p_plus == 0.0:
        layout = uap_allocate(n, x, m, max(1, -(-m // x)))
    elif cr.p_minus == 0.0:
        layout = _swap(uap_allocate(n, n - x, m, max(1, -(-m // (n - x)))), n, x)
    elif cr.r >= 1.0:
        dep = depth(cr.r, p)
        tie, d = dep.tie, dep.d
        layout = uap_allocate(n, x, m, d)
    else:
        # plus sites are the likelier-unlocked group; mirror the process
        dep = depth(1.0 / cr.r, p)
        tie, d = dep.tie, dep.d
        layout = _swap(uap_allocate(n, n - x, m, d), n, x)
    value = (cr.p_minus * _group_sum(layout.minus_levels, p)
             + cr.p_plus * _group_sum(layout.plus_levels, p))
    return XValue(x, value, cr.p_minus, cr.p_plus, cr.r, d, layout, tie)


@dataclass(frozen=True)
class SymmetricValue:
    value: float
    minus_count_probs: tuple[float, ...]
    per_x: tuple[XValue | None, ...]


def value(n: int, k: int, m: int, a: float, b: float, p: float) -> SymmetricValue:
    """Expected damage of the optimal attack, averaged over the minus count.

    Minus counts of probability zero (only possible with perfect tests)
    get ``None`` in ``per_x``.
    """
    dist = minus_count_dist(n, k, a, b)
    per_x = []
    total = []
    for x, px in enumerate(dist.probs):
        if px <= 0.0:
            per_x.append(None)
            continue
        xv = value_given_x(n, k, m, x, a, b, p)
        per_x.append(xv)
        total.append(px * xv.value)
    return SymmetricValue(math.fsum(total), dist.probs, tuple(per_x))


def strategy_value(outcomes, bombs, alpha_minus: float, alpha_plus: float, p: float) -> float:
    """Expected damage of a concrete per-site allocation under a symmetric posterior."""
    return math.fsum((alpha_plus if o else alpha_minus) * explosion_prob(u, p)
                     for o, u in zip(outcomes, bombs))
