"""Independent ground truth: exhaustive search, simplex grids and Monte Carlo."""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping

import numpy as np

from . import _kernels
from .equilibrium import _LossModel, best_response
from .model import (Allocation, DefenderMix, GameSpec, Signal, SpecError,
                    explosion_table, k_subsets, validate_spec)
from .posterior import likelihoods, marginal_no_lock
from .symmetric import value_given_x

MAX_ENUMERATION = 10 ** 6
MAX_GRID_CONFIGS = 4
MAX_GRID_POINTS = 2 * 10 ** 6
CHUNK = 4096
POLICIES = ("greedy-best-response", "uap-symmetric", "uniform-random", "single-site:i")


@lru_cache(maxsize=64)
def compositions(n: int, m: int) -> np.ndarray:
    """Every way to place ``m`` bombs on ``n`` sites, rows in lexicographic order."""
    if math.comb(m + n - 1, n - 1) > MAX_ENUMERATION:
        raise SpecError([("m", f"more than {MAX_ENUMERATION} allocations to enumerate")])
    rows = []
    for bars in itertools.combinations(range(m + n - 1), n - 1):
        edges = (-1,) + bars + (m + n - 1,)
        rows.append([edges[i + 1] - edges[i] - 1 for i in range(n)])
    out = np.array(rows, dtype=np.int64).reshape(-1, n)
    out = out[np.lexsort(out.T[::-1])]
    out.setflags(write=False)
    return out


def exhaustive_best_allocation(alpha, c, p: float, m: int) -> tuple[Allocation, float]:
    alpha = np.asarray(alpha, dtype=float)
    c = np.broadcast_to(np.asarray(c, dtype=float), alpha.shape)
    allocs = compositions(len(alpha), m)
    vals = explosion_table(m, p)[allocs] @ (alpha * c)
    best = int(np.argmax(vals))
    return Allocation(tuple(allocs[best])), float(vals[best])


def exhaustive_symmetric_value(n: int, k: int, m: int, x: int, a: float, b: float,
                               p: float) -> float:
    """Best achievable damage for the signal whose first ``x`` sites are minus.

    The posterior comes from enumerating every lock placement, not from the
    closed-form ratios, so this checks both halves of the symmetric solver.
    """
    signal = Signal((0,) * x + (1,) * (n - x))
    alpha = marginal_no_lock(DefenderMix.uniform(n, k), signal, a, b)
    return exhaustive_best_allocation(alpha, 1.0, p, m)[1]


@dataclass(frozen=True)
class GridResult:
    mix: DefenderMix
    value: float
    slack: float
    points: int


def simplex_grid(dim: int, resolution: int) -> np.ndarray:
    if dim == 1:
        return np.ones((1, 1))
    if dim == 2:
        t = np.arange(resolution + 1) / resolution
        return np.column_stack((1.0 - t, t))
    rows = [[c / resolution for c in comp] for comp in compositions(dim, resolution)]
    return np.array(rows)


def grid_min_defender(spec: GameSpec, resolution: int) -> GridResult:
    """Best defender mix on a uniform simplex grid over all lock configurations.

    ``slack`` bounds how far the grid minimum can sit above the true
    minimum: every linear piece of the loss has per-config slopes in
    ``[0, max unlocked value]``, and the true minimizer is within L1
    distance ``(configs - 1) / resolution`` of a grid point.
    """
    spec = validate_spec(spec)
    if not spec.is_fixed:
        raise SpecError([("locks", "grid search needs fixed-k mode")])
    configs = k_subsets(spec.n, spec.k)
    G = len(configs)
    if G > MAX_GRID_CONFIGS:
        raise SpecError([("n", f"grid search supports at most {MAX_GRID_CONFIGS} configurations")])
    if resolution < 1 or math.comb(resolution + G - 1, G - 1) > MAX_GRID_POINTS:
        raise SpecError([("resolution", f"grid exceeds {MAX_GRID_POINTS} points")])
    grid = simplex_grid(G, resolution)
    model = _LossModel(spec, configs)
    vals = model.evaluate_many(grid)
    best = int(np.argmin(vals))
    probs = grid[best]
    slope = float(model.unlocked_value.sum(axis=1).max())
    slack = slope * (G - 1) / resolution
    return GridResult(DefenderMix(tuple(configs), tuple(probs / probs.sum())),
                      float(vals[best]), slack, len(grid))


# ------------------------------------------------------------------ simulate

@dataclass(frozen=True)
class SimResult:
    mean: float
    stderr: float
    trials: int
    seed: int


def _policy_table(spec: GameSpec, mix: DefenderMix, strategy) -> np.ndarray | None:
    """Signal-index -> allocation table, or ``None`` for the uniform-random policy."""
    n, m = spec.n, spec.m
    if isinstance(strategy, str):
        if strategy == "greedy-best-response":
            return best_response(mix, spec).alloc
        if strategy == "uniform-random":
            return None
        if strategy == "uap-symmetric":
            if not (spec.symmetric and spec.is_fixed):
                raise SpecError([("policy", "uap-symmetric needs a symmetric fixed-k spec")])
            a, b = spec.a[0], spec.b[0]
            table = np.zeros((2 ** n, n), dtype=np.int64)
            layouts = {}
            for s in range(2 ** n):
                sig = Signal.from_index(s, n)
                x = sig.minus_count
                if x not in layouts:
                    try:
                        layouts[x] = value_given_x(n, spec.k, m, x, a, b, spec.p).layout
                    except SpecError:
                        layouts[x] = None  # minus count of probability zero
                if layouts[x] is not None:
                    table[s] = layouts[x].site_allocation(sig.outcomes)
            return table
        if strategy.startswith("single-site:"):
            try:
                site = int(strategy.split(":", 1)[1])
            except ValueError:
                site = 0
            if not 1 <= site <= n:
                raise SpecError([("policy", f"bad site in {strategy!r}")])
            table = np.zeros((2 ** n, n), dtype=np.int64)
            table[:, site - 1] = m
            return table
        raise SpecError([("policy", f"unknown policy {strategy!r}; known: {', '.join(POLICIES)}")])

    if isinstance(strategy, Mapping):
        table = np.full((2 ** n, n), -1, dtype=np.int64)
        for sig, alloc in strategy.items():
            sig = Signal.parse(sig) if isinstance(sig, str) else sig
            bombs = alloc.bombs if isinstance(alloc, Allocation) else tuple(alloc)
            if len(bombs) != n or sum(bombs) != m or min(bombs) < 0:
                raise SpecError([("strategy", f"allocation for {sig} must place {m} bombs on {n} sites")])
            table[sig.index] = bombs
    else:
        table = np.asarray(strategy, dtype=np.int64)
        if table.shape != (2 ** n, n):
            raise SpecError([("strategy", f"expected a ({2 ** n}, {n}) allocation table")])
    a, b, _ = spec.arrays()
    reachable = likelihoods(mix, n, a, b) @ mix.prob_array() > 0
    missing = [str(Signal.from_index(s, n)) for s in np.flatnonzero(reachable & (table < 0).any(axis=1))]
    if missing:
        raise SpecError([("strategy", f"no allocation for signals {', '.join(missing)}")])
    return np.where(table < 0, 0, table)


def simulate(spec: GameSpec, mix: DefenderMix, strategy, trials: int, seed: int,
             workers: int = 1, backend: str | None = None) -> SimResult:
    """Monte Carlo estimate of the damage of ``strategy`` against ``mix``.

    Trials run in chunks of 4096; chunk ``j`` draws from its own PCG64 stream
    seeded by ``SeedSequence(seed, spawn_key=(j,))``, and chunk statistics
    are merged in chunk order, so the result does not depend on ``workers``.
    """
    spec = validate_spec(spec)
    mix.check(spec)
    if trials < 1:
        raise SpecError([("trials", "must be >= 1")])
    be = _kernels.get_backend(backend)
    n, m = spec.n, spec.m
    table = _policy_table(spec, mix, strategy)
    a, b, c = spec.arrays()
    locks = mix.lock_matrix(n)
    cum = np.cumsum(mix.prob_array())
    hit = explosion_table(m, spec.p)
    n_chunks = -(-trials // CHUNK)

    def run_chunk(j):
        size = min(CHUNK, trials - j * CHUNK)
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(j,))))
        u_cfg = rng.random(size)
        u_sig = rng.random((size, n))
        u_exp = rng.random((size, n))
        locked, sig = be.sample_locks_signals(u_cfg, u_sig, cum, locks, a, b)
        if table is None:
            alloc = np.zeros((size, n), dtype=np.int64)
            rows = np.arange(size)
            for site in rng.integers(0, n, size=(m, size)):
                alloc[rows, site] += 1
        else:
            alloc = np.ascontiguousarray(table[sig])
        dmg = be.realized_damage(locked, alloc, u_exp, c, hit)
        mean = dmg.sum() / size
        return size, mean, float(((dmg - mean) ** 2).sum())

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run_chunk, range(n_chunks)))
    else:
        parts = [run_chunk(j) for j in range(n_chunks)]

    count, mean, m2 = 0, 0.0, 0.0
    for size, c_mean, c_m2 in parts:
        total = count + size
        delta = c_mean - mean
        mean += delta * size / total
        m2 += c_m2 + delta * delta * count * size / total
        count = total
    stderr = math.sqrt(m2 / (count - 1) / count) if count > 1 else 0.0
    return SimResult(float(mean), stderr, trials, seed)
