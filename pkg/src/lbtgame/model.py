"""Core domain types for the locks, bombs and testing game.

Sites are numbered from 1 in every public type (``LockConfig.sites``,
signal strings, serialized documents).  Arrays handed to the numeric
kernels are 0-based.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence, Union

import numpy as np

MAX_SITES = 62
PROB_SUM_TOL = 1e-12


class SpecError(ValueError):
    """Raised when an instance or argument violates a model invariant.

    ``problems`` holds ``(field, message)`` pairs, one per violation.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [("", problems)]
        self.problems = list(problems)
        text = "; ".join(f"{f}: {m}" if f else m for f, m in self.problems)
        super().__init__(text)


@dataclass(frozen=True)
class FixedLocks:
    k: int


@dataclass(frozen=True)
class IIDLocks:
    lam: float


LockMode = Union[FixedLocks, IIDLocks]


@dataclass(frozen=True)
class GameSpec:
    """A full game instance.

    ``a``, ``b`` and ``c`` may be scalars or length-``n`` sequences until
    the spec passes through :func:`validate_spec`, which broadcasts them to
    tuples and sets ``symmetric``.
    """

    n: int
    locks: LockMode
    m: int
    a: float | Sequence[float]
    b: float | Sequence[float]
    c: float | Sequence[float] = 1.0
    p: float = 1.0
    symmetric: bool = field(default=False, compare=False)

    @classmethod
    def fixed(cls, n, k, m, a, b, c=1.0, p=1.0) -> "GameSpec":
        return validate_spec(cls(n, FixedLocks(k), m, a, b, c, p))

    @classmethod
    def iid(cls, n, lam, m, a, b, c=1.0, p=1.0) -> "GameSpec":
        return validate_spec(cls(n, IIDLocks(lam), m, a, b, c, p))

    @property
    def k(self) -> int:
        if not isinstance(self.locks, FixedLocks):
            raise SpecError([("locks", "instance is not in fixed-k mode")])
        return self.locks.k

    @property
    def is_fixed(self) -> bool:
        return isinstance(self.locks, FixedLocks)

    def with_m(self, m: int) -> "GameSpec":
        return validate_spec(replace(self, m=m))

    def arrays(self):
        """Return ``(a, b, c)`` as float64 arrays."""
        spec = validate_spec(self)
        return (np.asarray(spec.a, dtype=float), np.asarray(spec.b, dtype=float),
                np.asarray(spec.c, dtype=float))


def _broadcast(name, value, n, problems):
    if np.ndim(value) == 0:
        return (float(value),) * n
    vals = tuple(float(v) for v in value)
    if len(vals) != n:
        problems.append((name, f"expected {n} entries, got {len(vals)}"))
    return vals


def validate_spec(spec: GameSpec) -> GameSpec:
    """Check every invariant of ``spec`` and return a normalized copy.

    All violations are collected before raising, so a single
    :class:`SpecError` names every offending field.
    """
    problems = []
    n = spec.n
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 1:
        raise SpecError([("n", "must be an integer >= 1")])
    if n > MAX_SITES:
        problems.append(("n", f"must be <= {MAX_SITES}"))
    n = int(n)

    locks = spec.locks
    if isinstance(locks, FixedLocks):
        if not isinstance(locks.k, (int, np.integer)) or isinstance(locks.k, bool):
            problems.append(("k", "must be an integer"))
        elif locks.k < 0:
            problems.append(("k", "must be >= 0"))
        elif locks.k >= n:
            problems.append(("k", "k must be < n"))
        else:
            locks = FixedLocks(int(locks.k))
    elif isinstance(locks, IIDLocks):
        if not 0.0 <= float(locks.lam) <= 1.0:
            problems.append(("lambda", "must lie in [0, 1]"))
        locks = IIDLocks(float(locks.lam))
    else:
        problems.append(("locks", "must be FixedLocks or IIDLocks"))

    m = spec.m
    if not isinstance(m, (int, np.integer)) or isinstance(m, bool) or m < 0:
        problems.append(("m", "must be an integer >= 0"))
    else:
        m = int(m)

    a = _broadcast("a", spec.a, n, problems)
    b = _broadcast("b", spec.b, n, problems)
    c = _broadcast("c", spec.c, n, problems)
    for name, vals in (("a", a), ("b", b)):
        if any(not 0.0 <= v <= 1.0 for v in vals):
            problems.append((name, "entries must lie in [0, 1]"))
    if any(not v > 0.0 or math.isinf(v) for v in c):
        problems.append(("c", "entries must be finite and > 0"))
    p = float(spec.p)
    if not 0.0 <= p <= 1.0:
        problems.append(("p", "must lie in [0, 1]"))
    if problems:
        raise SpecError(problems)

    symmetric = len(set(a)) == 1 and len(set(b)) == 1 and all(v == 1.0 for v in c)
    return GameSpec(n, locks, m, a, b, c, p, symmetric)


@dataclass(frozen=True, order=True)
class LockConfig:
    """Sorted 1-based indices of the locked sites."""

    sites: tuple[int, ...]

    def __post_init__(self):
        sites = tuple(int(s) for s in self.sites)
        if any(s2 <= s1 for s1, s2 in zip(sites, sites[1:])):
            raise SpecError([("sites", f"must be strictly increasing: {sites}")])
        if sites and sites[0] < 1:
            raise SpecError([("sites", "indices are 1-based")])
        object.__setattr__(self, "sites", sites)

    def check(self, n: int, k: int | None = None) -> None:
        if self.sites and self.sites[-1] > n:
            raise SpecError([("sites", f"index {self.sites[-1]} exceeds n={n}")])
        if k is not None and len(self.sites) != k:
            raise SpecError([("sites", f"expected {k} locks, got {len(self.sites)}")])

    def mask(self, n: int) -> np.ndarray:
        self.check(n)
        out = np.zeros(n, dtype=bool)
        out[[s - 1 for s in self.sites]] = True
        return out

    def __contains__(self, site: int) -> bool:
        return site in self.sites

    def __str__(self):
        return "{" + ",".join(map(str, self.sites)) + "}"


@dataclass(frozen=True)
class Signal:
    """Per-site test outcomes; 1 is a plus (lock suspected), 0 a minus."""

    outcomes: tuple[int, ...]

    def __post_init__(self):
        outcomes = tuple(int(v) for v in self.outcomes)
        if any(v not in (0, 1) for v in outcomes):
            raise SpecError([("signal", "outcomes must be 0 or 1")])
        object.__setattr__(self, "outcomes", outcomes)

    @classmethod
    def parse(cls, text: str) -> "Signal":
        """Parse ``"-+"``-style text (site 1 first)."""
        table = {"-": 0, "+": 1, "0": 0, "1": 1}
        try:
            return cls(tuple(table[ch] for ch in text))
        except KeyError:
            raise SpecError([("signal", f"cannot parse {text!r}")]) from None

    @classmethod
    def from_index(cls, index: int, n: int) -> "Signal":
        return cls(tuple((index >> i) & 1 for i in range(n)))

    @property
    def n(self) -> int:
        return len(self.outcomes)

    @property
    def minus_count(self) -> int:
        return self.outcomes.count(0)

    @property
    def index(self) -> int:
        """Bit ``i`` holds the outcome at site ``i + 1``."""
        return sum(v << i for i, v in enumerate(self.outcomes))

    def __str__(self):
        return "".join("+" if v else "-" for v in self.outcomes)


def all_signals(n: int) -> list[Signal]:
    return [Signal.from_index(i, n) for i in range(2 ** n)]


def signal_bits(n: int) -> np.ndarray:
    """``(2**n, n)`` boolean matrix; row ``s`` is the signal with index ``s``."""
    idx = np.arange(2 ** n)[:, None]
    return ((idx >> np.arange(n)[None, :]) & 1).astype(bool)


@dataclass(frozen=True)
class Allocation:
    bombs: tuple[int, ...]

    def __post_init__(self):
        bombs = tuple(int(v) for v in self.bombs)
        if any(v < 0 for v in bombs):
            raise SpecError([("bombs", "counts must be non-negative")])
        object.__setattr__(self, "bombs", bombs)

    @property
    def total(self) -> int:
        return sum(self.bombs)


@dataclass(frozen=True)
class DefenderMix:
    """A probability distribution over lock configurations."""

    configs: tuple[LockConfig, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        configs = tuple(c if isinstance(c, LockConfig) else LockConfig(tuple(c))
                        for c in self.configs)
        probs = tuple(float(p) for p in self.probs)
        if len(configs) != len(probs):
            raise SpecError([("mix", "configs and probs differ in length")])
        if len(set(configs)) != len(configs):
            raise SpecError([("mix", "configs must be distinct")])
        if any(p < 0 for p in probs):
            raise SpecError([("mix", "probabilities must be non-negative")])
        if abs(math.fsum(probs) - 1.0) > PROB_SUM_TOL:
            raise SpecError([("mix", f"probabilities sum to {math.fsum(probs)!r}, not 1")])
        object.__setattr__(self, "configs", configs)
        object.__setattr__(self, "probs", probs)

    @property
    def support(self) -> list[tuple[LockConfig, float]]:
        return list(zip(self.configs, self.probs))

    @classmethod
    def uniform(cls, n: int, k: int) -> "DefenderMix":
        configs = k_subsets(n, k)
        return cls(tuple(configs), (1.0 / len(configs),) * len(configs))

    @classmethod
    def from_probs(cls, n: int, k: int, probs: Sequence[float]) -> "DefenderMix":
        """Mix over all k-subsets in lexicographic order."""
        configs = k_subsets(n, k)
        if len(probs) != len(configs):
            raise SpecError([("mix", f"expected {len(configs)} probabilities")])
        return cls(tuple(configs), tuple(probs))

    @classmethod
    def point(cls, config: LockConfig | Iterable[int]) -> "DefenderMix":
        if not isinstance(config, LockConfig):
            config = LockConfig(tuple(config))
        return cls((config,), (1.0,))

    @classmethod
    def iid(cls, n: int, lam: float) -> "DefenderMix":
        """Product prior: each site locked independently with probability ``lam``."""
        configs, probs = [], []
        for size in range(n + 1):
            for cfg in k_subsets(n, size):
                configs.append(cfg)
                probs.append(lam ** size * (1.0 - lam) ** (n - size))
        total = math.fsum(probs)
        return cls(tuple(configs), tuple(p / total for p in probs))

    def lock_matrix(self, n: int) -> np.ndarray:
        """``(len(configs), n)`` boolean matrix of locked sites."""
        out = np.zeros((len(self.configs), n), dtype=bool)
        for row, cfg in enumerate(self.configs):
            out[row] = cfg.mask(n)
        return out

    def prob_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)

    def lock_marginals(self, n: int) -> np.ndarray:
        """Prior lock probabilities per site (``beta``)."""
        return self.prob_array() @ self.lock_matrix(n).astype(float)

    def check(self, spec: GameSpec) -> None:
        k = spec.k if spec.is_fixed else None
        for cfg in self.configs:
            cfg.check(spec.n, k)


def k_subsets(n: int, k: int) -> list[LockConfig]:
    return [LockConfig(s) for s in itertools.combinations(range(1, n + 1), k)]


def explosion_prob(u, p: float):
    """Probability that ``u`` independent bombs yield at least one explosion."""
    u_arr = np.asarray(u)
    if np.any(u_arr < 0):
        raise SpecError([("u", "bomb count must be non-negative")])
    if not 0.0 <= p <= 1.0:
        raise SpecError([("p", "must lie in [0, 1]")])
    out = 1.0 - (1.0 - p) ** u_arr
    return float(out) if u_arr.ndim == 0 else out


def explosion_table(m: int, p: float) -> np.ndarray:
    """``table[u]`` is ``explosion_prob(u, p)`` for ``u = 0..m``."""
    return 1.0 - (1.0 - p) ** np.arange(m + 1, dtype=float)


def damage_given_locks(locks: LockConfig, u, c, p: float) -> float:
    bombs = u.bombs if isinstance(u, Allocation) else tuple(u)
    c = np.broadcast_to(np.asarray(c, dtype=float), (len(bombs),)) if np.ndim(c) == 0 \
        else np.asarray(c, dtype=float)
    if len(c) != len(bombs):
        raise SpecError([("c", "length differs from allocation")])
    n = len(bombs)
    locks.check(n)
    total = 0.0
    for i in range(n):
        if (i + 1) not in locks:
            total += c[i] * explosion_prob(bombs[i], p)
    return total
