"""Signal likelihoods, posteriors over lock placements and critical ratios."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .model import (MAX_SITES, DefenderMix, LockConfig, Signal, SpecError,
                    signal_bits)


@dataclass(frozen=True)
class CriticalRatios:
    """Posterior no-lock probabilities at a minus site and at a plus site.

    ``r`` is ``inf`` (and ``perfect`` is set) when a plus site is certainly
    locked, i.e. ``p_plus == 0``.  ``x`` is ``None`` for the i.i.d. model.
    """

    p_minus: float
    p_plus: float
    r: float
    x: int | None = None

    @property
    def perfect(self) -> bool:
        return self.p_plus == 0.0


@dataclass(frozen=True)
class MinusCountDist:
    probs: tuple[float, ...]

    def __getitem__(self, x: int) -> float:
        return self.probs[x]

    def __len__(self):
        return len(self.probs)


def _vec(v, n):
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise SpecError([("a/b", f"expected {n} entries, got {arr.shape[0]}")])
    return arr


def signal_likelihood(config: LockConfig, s: Signal, a, b) -> float:
    n = s.n
    config.check(n)
    a, b = _vec(a, n), _vec(b, n)
    out = 1.0
    for i, plus in enumerate(s.outcomes):
        locked = (i + 1) in config
        if locked:
            out *= a[i] if plus else 1.0 - a[i]
        else:
            out *= 1.0 - b[i] if plus else b[i]
    return out


def signal_prob(mix: DefenderMix, s: Signal, a, b) -> float:
    return math.fsum(w * signal_likelihood(cfg, s, a, b) for cfg, w in mix.support)


def posterior_locks(mix: DefenderMix, s: Signal, a, b) -> DefenderMix:
    joint = [w * signal_likelihood(cfg, s, a, b) for cfg, w in mix.support]
    total = math.fsum(joint)
    if total <= 0.0:
        raise SpecError([("signal", f"signal {s} has probability zero under this mix")])
    return DefenderMix(mix.configs, tuple(j / total for j in joint))


def marginal_no_lock(mix: DefenderMix, s: Signal, a, b) -> np.ndarray:
    """Posterior probability that each site is unlocked given ``s``."""
    n = s.n
    post = posterior_locks(mix, s, a, b)
    alpha = np.zeros(n)
    for cfg, w in post.support:
        for i in range(n):
            if (i + 1) not in cfg:
                alpha[i] += w
    return alpha


def likelihoods(mix: DefenderMix, n: int, a, b) -> np.ndarray:
    """Matrix ``P[s, g]`` of signal likelihoods for every signal index and config."""
    return _kernels.likelihood_matrix(signal_bits(n), mix.lock_matrix(n), _vec(a, n), _vec(b, n))


def _check_symmetric_args(n, k, a, b):
    if not isinstance(n, (int, np.integer)) or n < 1 or n > MAX_SITES:
        raise SpecError([("n", f"must be an integer in 1..{MAX_SITES}")])
    if not 0 <= k < n:
        raise SpecError([("k", "k must be < n")])
    for name, v in (("a", a), ("b", b)):
        if np.ndim(v) != 0 or not 0.0 <= v <= 1.0:
            raise SpecError([(name, "must be a scalar in [0, 1]")])


def _overlap_weight(n: int, k: int, x: int, a: float, b: float) -> float:
    """Sum over k-subsets of P(one fixed signal with x minuses | subset).

    ``j`` counts the locks sitting under minus signals.
    """
    if k > n or x < 0 or x > n:
        return 0.0
    total = 0.0
    for j in range(max(0, k - (n - x)), min(k, x) + 1):
        ways = math.comb(x, j) * math.comb(n - x, k - j)
        total += ways * ((1.0 - a) ** j * b ** (x - j) * a ** (k - j)
                         * (1.0 - b) ** (n - x - k + j))
    return total


def minus_count_dist(n: int, k: int, a: float, b: float) -> MinusCountDist:
    """Distribution of the number of minus signals under uniformly placed locks."""
    _check_symmetric_args(n, k, a, b)
    norm = math.comb(n, k)
    probs = [math.comb(n, x) * _overlap_weight(n, k, x, a, b) / norm for x in range(n + 1)]
    return MinusCountDist(tuple(probs))


def critical_ratio_B(lam: float, a: float, b: float) -> CriticalRatios:
    if not 0.0 < lam < 1.0:
        raise SpecError([("lambda", "critical ratio needs 0 < lambda < 1")])
    den_minus = (1 - lam) * b + lam * (1 - a)
    den_plus = (1 - lam) * (1 - b) + lam * a
    if den_minus <= 0 or den_plus <= 0:
        raise SpecError([("a/b", "a signal value has probability zero")])
    p_minus = (1 - lam) * b / den_minus
    p_plus = (1 - lam) * (1 - b) / den_plus
    r = p_minus / p_plus if p_plus > 0 else math.inf
    return CriticalRatios(p_minus, p_plus, r)


def critical_ratio_A(n: int, k: int, x: int, a: float, b: float) -> CriticalRatios:
    """Critical ratio for exactly ``k`` uniformly placed locks given ``x`` minuses.

    Conditioning on one designated site leaves ``n - 1`` sites carrying all
    ``k`` locks, so the joint weights reduce to the same overlap sums used
    by :func:`minus_count_dist`.
    """
    _check_symmetric_args(n, k, a, b)
    if x <= 0 or x >= n:
        raise SpecError([("x", f"x={x} has no minus/plus pair; "
                                f"use the unconditional marginal (n-k)/n")])
    full = _overlap_weight(n, k, x, a, b)
    if full <= 0.0:
        raise SpecError([("x", f"N={x} has probability zero")])
    p_minus = b * _overlap_weight(n - 1, k, x - 1, a, b) / full
    p_plus = (1.0 - b) * _overlap_weight(n - 1, k, x, a, b) / full
    r = p_minus / p_plus if p_plus > 0 else math.inf
    return CriticalRatios(p_minus, p_plus, r, x)


def quality_index(a: float, b: float) -> float:
    """Combined test quality ``(a/(1-a)) * (b/(1-b))``."""
    if a >= 1.0 or b >= 1.0:
        return math.inf
    return (a / (1.0 - a)) * (b / (1.0 - b))
