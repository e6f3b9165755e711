"""Defender-side solvers: attacker best response, losses and equilibria."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from . import _kernels
from .model import (Allocation, DefenderMix, GameSpec, LockConfig, Signal,
                    SpecError, k_subsets, validate_spec)
from .posterior import likelihoods

PROTECT_THRESHOLD = 1e-6
MAX_GENERAL_SITES = 12
MAX_GENERAL_ALLOCATIONS = 10 ** 5


class NonConvergenceError(RuntimeError):
    """The equilibrium iteration hit its cap; ``incumbent`` holds the best mix seen."""

    def __init__(self, message, incumbent=None, value=None):
        super().__init__(message)
        self.incumbent = incumbent
        self.value = value


@dataclass(frozen=True)
class BestResponse:
    per_signal: dict[Signal, tuple[Allocation, float]]
    value: float
    signal_probs: np.ndarray = field(repr=False)
    alloc: np.ndarray = field(repr=False)
    site_loss: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class EquilibriumReport:
    """Equilibrium defender mix and the diagnostics around it.

    ``config_losses`` is the expected damage suffered under each lock
    configuration when the attacker plays the equilibrium mixed strategy;
    the defender is indifferent among the configurations it uses, and
    ``indifference_gap`` measures the spread over them.  The two-site
    closed form instead reports the spread between both sites' potential
    damages at the pivot signals.
    """

    mix: DefenderMix
    value: float
    per_site_loss: np.ndarray
    protected_set: tuple[int, ...]
    indifference_gap: float
    config_losses: dict[LockConfig, float] | None = None
    breakpoints: dict[str, float] | None = None
    extras: dict = field(default_factory=dict)

    @property
    def lock_marginals(self) -> np.ndarray:
        return self.mix.lock_marginals(len(self.per_site_loss))


class _LossModel:
    """Precomputed pieces of the defender's loss over a fixed config list."""

    def __init__(self, spec: GameSpec, configs):
        spec = validate_spec(spec)
        self.spec = spec
        self.n = n = spec.n
        self.configs = list(configs)
        a, b, c = spec.arrays()
        self.c = c
        self.locks = np.array([cfg.mask(n) for cfg in self.configs], dtype=bool)
        self.lik = _kernels.likelihood_matrix(
            ((np.arange(2 ** n)[:, None] >> np.arange(n)[None, :]) & 1).astype(bool),
            self.locks, a, b)
        self.unlocked_value = (~self.locks) * c[None, :]
        q = 1.0 - spec.p
        self.qpow = q ** np.arange(spec.m + 1, dtype=float)
        self.hit = 1.0 - self.qpow

    def weights(self, probs):
        return (self.lik * probs[None, :]) @ self.unlocked_value

    def respond(self, weights):
        return _kernels.greedy_allocate(weights, self.qpow, self.spec.p, self.spec.m)

    def evaluate(self, probs):
        w = self.weights(probs)
        alloc = self.respond(w)
        site_loss = (w * self.hit[alloc]).sum(axis=0)
        return math.fsum(site_loss), alloc, w, site_loss

    def cut(self, alloc):
        """Per-config damage of a fixed signal-to-allocation policy."""
        return (self.lik * (self.hit[alloc] @ self.unlocked_value.T)).sum(axis=0)

    def evaluate_many(self, probs_batch, chunk=20000):
        out = np.empty(len(probs_batch))
        S = self.lik.shape[0]
        for start in range(0, len(probs_batch), chunk):
            B = probs_batch[start:start + chunk]
            w = np.einsum("kg,sg,gi->ksi", B, self.lik, self.unlocked_value)
            flat = w.reshape(-1, self.n)
            alloc = self.respond(flat)
            vals = (flat * self.hit[alloc]).sum(axis=1).reshape(len(B), S)
            out[start:start + len(B)] = vals.sum(axis=1)
        return out


def _check_mix(mix, spec):
    mix.check(spec)


def tie_averaged(weights, gained, rel=1e-12):
    """Spread each signal's damage evenly over sites of equal attack weight.

    Swapping the bombs of two equal-weight sites is also optimal, so the
    attacker mixing uniformly over such swaps is a best response; this is
    its per-site damage.  Row sums are unchanged.
    """
    out = np.array(gained, dtype=float)
    for s in range(weights.shape[0]):
        row = weights[s]
        order = np.argsort(row, kind="stable")
        start = 0
        for j in range(1, len(order) + 1):
            if j == len(order) or row[order[j]] - row[order[start]] > rel * abs(row[order[start]]):
                if j - start > 1:
                    grp = order[start:j]
                    out[s, grp] = out[s, grp].sum() / (j - start)
                start = j
    return out


def best_response(mix: DefenderMix, spec: GameSpec) -> BestResponse:
    """Optimal attacker allocation for every signal of positive probability.

    Bombs go one at a time to the site of largest marginal gain.  The
    objective is separable with diminishing increments, so the greedy
    allocation is optimal; ties go to the lowest site index.
    """
    spec = validate_spec(spec)
    _check_mix(mix, spec)
    n = spec.n
    a, b, c = spec.arrays()
    lik = likelihoods(mix, n, a, b)
    probs = mix.prob_array()
    ps = lik @ probs
    w = (lik * probs[None, :]) @ ((~mix.lock_matrix(n)) * c[None, :])
    qpow = (1.0 - spec.p) ** np.arange(spec.m + 1, dtype=float)
    hit = 1.0 - qpow
    alloc = _kernels.greedy_allocate(w, qpow, spec.p, spec.m)
    gained = w * hit[alloc]
    per_signal = {}
    for s in range(2 ** n):
        if ps[s] > 0.0:
            per_signal[Signal.from_index(s, n)] = (Allocation(tuple(alloc[s])),
                                                   math.fsum(gained[s]) / ps[s])
    site_loss = tie_averaged(w, gained).sum(axis=0)
    return BestResponse(per_signal, math.fsum(gained.sum(axis=1)), ps, alloc, site_loss)


def expected_loss(mix: DefenderMix, spec: GameSpec):
    """Total expected loss and its per-site split under the best response.

    Sites the attacker values equally share the damage of a signal evenly.
    """
    br = best_response(mix, spec)
    return br.value, br.site_loss.copy()


def posterior_alpha(mix: DefenderMix, spec: GameSpec) -> dict[Signal, np.ndarray]:
    """``alpha_i(s)`` for every signal of positive probability."""
    spec = validate_spec(spec)
    n = spec.n
    a, b, _ = spec.arrays()
    lik = likelihoods(mix, n, a, b)
    probs = mix.prob_array()
    joint = lik * probs[None, :]
    ps = joint.sum(axis=1)
    free = joint @ (~mix.lock_matrix(n)).astype(float)
    return {Signal.from_index(s, n): free[s] / ps[s] for s in range(2 ** n) if ps[s] > 0}


# ------------------------------------------------------------ non-informative

def marginal_decomposition(n: int, beta) -> DefenderMix:
    """A mix over k-subsets whose lock marginals equal ``beta`` (systematic sampling).

    Cumulative marginals are laid on ``[0, k)``; each point ``u + t`` for
    ``t = 0..k-1`` falls in exactly one site's interval, selecting ``k``
    distinct sites.  Sweeping ``u`` over ``[0, 1)`` yields at most ``n + 1``
    distinct subsets with exact marginals.
    """
    beta = np.asarray(beta, dtype=float)
    k = int(round(beta.sum()))
    if abs(beta.sum() - k) > 1e-9 or np.any(beta < -1e-12) or np.any(beta > 1 + 1e-12):
        raise SpecError([("beta", "marginals must lie in [0,1] and sum to an integer")])
    beta = np.clip(beta, 0.0, 1.0)
    cum = np.concatenate(([0.0], np.cumsum(beta)))
    cuts = sorted({float(v - math.floor(v)) for v in cum} | {0.0, 1.0})
    weights: dict[tuple[int, ...], float] = {}
    for lo, hi in zip(cuts, cuts[1:]):
        if hi - lo <= 1e-15:
            continue
        u = 0.5 * (lo + hi)
        chosen = []
        for t in range(k):
            pt = u + t
            i = int(np.searchsorted(cum, pt, side="right")) - 1
            chosen.append(min(i, n - 1) + 1)
        key = tuple(sorted(set(chosen)))
        if len(key) != k:
            raise ArithmeticError("systematic decomposition produced a repeated site")
        weights[key] = weights.get(key, 0.0) + (hi - lo)
    configs = sorted(weights)
    probs = np.array([weights[cfg] for cfg in configs])
    probs /= probs.sum()
    return DefenderMix(tuple(LockConfig(cfg) for cfg in configs), tuple(probs))


def solve_noninformative(c, k: int) -> EquilibriumReport:
    """Closed-form equilibrium for one bomb, sure explosions and coin-flip tests.

    ``c`` must be sorted non-increasing.  Sites beyond ``k_star`` stay
    unprotected; the first ``k_star`` sites are made equally attractive.
    """
    c = np.asarray(c, dtype=float)
    n = len(c)
    if np.any(c <= 0):
        raise SpecError([("c", "values must be > 0")])
    if np.any(np.diff(c) > 0):
        raise SpecError([("c", "values must be sorted non-increasing")])
    if not 1 <= k < n:
        raise SpecError([("k", "need 1 <= k < n")])
    inv_cum = np.cumsum(1.0 / c)
    k_star = max(j for j in range(k, n + 1) if c[j - 1] > (j - k) / inv_cum[j - 1])
    v_star = (k_star - k) / inv_cum[k_star - 1]
    if k_star < n and not v_star > c[k_star]:
        raise ArithmeticError("value does not exceed the first unprotected site value")
    alpha = np.ones(n)
    alpha[:k_star] = v_star / c[:k_star]
    beta = 1.0 - alpha
    if k == 1:
        mix = DefenderMix.from_probs(n, 1, beta)
    else:
        mix = marginal_decomposition(n, beta)
    attack = np.zeros(n)
    attack[:k_star] = (1.0 / c[:k_star]) / inv_cum[k_star - 1]
    per_site = c * alpha * attack
    config_losses = {cfg: float(sum(c[j] * attack[j] for j in range(n) if (j + 1) not in cfg))
                     for cfg, w in mix.support}
    used = [config_losses[cfg] for cfg, w in mix.support if w > PROTECT_THRESHOLD]
    protected = tuple(i + 1 for i in range(n) if beta[i] > PROTECT_THRESHOLD)
    return EquilibriumReport(
        mix=mix, value=float(v_star), per_site_loss=per_site, protected_set=protected,
        indifference_gap=float(max(used) - min(used)), config_losses=config_losses,
        extras={"k_star": k_star, "alpha": alpha, "attack_probs": attack})


# ------------------------------------------------------------------- two-site

def two_site_breakpoints(c: float, a: float, b: float) -> dict[str, float]:
    e1, e2, e3, e4 = b * a, (1 - b) * (1 - a), b * (1 - a), (1 - b) * a
    kappa = e1 / e2 if e2 > 0 else math.inf
    rho1 = 1.0 / (c * kappa + 1.0) if e2 > 0 else 0.0
    rho2 = 1.0 / (c / kappa + 1.0) if e2 > 0 else 1.0
    return {"e1": e1, "e2": e2, "e3": e3, "e4": e4, "kappa": kappa,
            "rho1": rho1, "rho2": rho2, "rho3": 1.0 / (c + 1.0),
            "c_star": (e1 + e3 + e4) / e1}


def two_site_branches(c: float, a: float, b: float):
    """``((x, v) at rho3, (x, v) at rho1)``: the two closed-form candidates."""
    bp = two_site_breakpoints(c, a, b)
    low = (1.0 / (1.0 + c), c * (a + b) / (1.0 + c))
    if math.isinf(bp["kappa"]):
        high = (0.0, 1.0)
    else:
        high = (1.0 / (1.0 + c * bp["kappa"]), c / (1.0 / bp["kappa"] + c))
    return low, high


def _two_site_supported(a, b):
    if a == b == 1.0 or a == b == 0.5:
        return True
    return 0.5 < a < 1.0 and 0.5 < b < 1.0


def solve_2x1(c: float, a: float, b: float) -> EquilibriumReport:
    """Closed-form equilibrium of two sites valued ``(c, 1)``, one lock, one bomb.

    ``x_star`` (in ``extras``) is the probability that the lock sits on the
    cheaper site 2.
    """
    if not c >= 1.0:
        raise SpecError([("c", "two-site closed form needs c >= 1")])
    if not _two_site_supported(a, b):
        raise SpecError([("a/b", "need 1/2 < a, b < 1, or a = b = 1, or a = b = 1/2")])
    bp = two_site_breakpoints(c, a, b)
    low, high = two_site_branches(c, a, b)
    perfect = a == b == 1.0
    at_rho1 = perfect or c > bp["c_star"]
    x_star, v_star = high if at_rho1 else low

    spec = GameSpec.fixed(2, 1, 1, a, b, (c, 1.0), 1.0)
    mix = DefenderMix.from_probs(2, 1, (1.0 - x_star, x_star))
    br = best_response(mix, spec)
    # potential damages of both sites at the signals whose attack flips at x_star
    e = (bp["e1"], bp["e2"], bp["e3"], bp["e4"])
    if at_rho1:
        pivots = [("-+", e[0], e[1])]
    else:
        pivots = [("--", e[2], e[2]), ("++", e[3], e[3])]
    gaps = []
    for _, like1, like2 in pivots:
        ps = x_star * like1 + (1 - x_star) * like2
        if ps > 0:
            gaps.append(abs(c * x_star * like1 - (1 - x_star) * like2) / ps)
    protected = tuple(i + 1 for i, beta in enumerate((1 - x_star, x_star)) if beta > PROTECT_THRESHOLD)
    return EquilibriumReport(
        mix=mix, value=float(v_star), per_site_loss=br.site_loss.copy(),
        protected_set=protected, indifference_gap=float(max(gaps, default=0.0)),
        breakpoints={key: bp[key] for key in ("rho1", "rho2", "rho3", "c_star")},
        extras={"x_star": x_star, "best_response": br, "e": e, "kappa": bp["kappa"],
                "pivot_signals": [name for name, _, _ in pivots]})


# -------------------------------------------------------------------- general

def _check_general(spec: GameSpec):
    if not spec.is_fixed:
        raise SpecError([("locks", "general solver needs fixed-k mode")])
    if spec.n > MAX_GENERAL_SITES:
        raise SpecError([("n", f"general solver supports n <= {MAX_GENERAL_SITES}")])
    if math.comb(spec.m + spec.n - 1, spec.n - 1) > MAX_GENERAL_ALLOCATIONS:
        raise SpecError([("m", "too many bomb allocations for the general solver")])


def solve_general(spec: GameSpec, tol: float = 1e-6, max_iter: int = 1000) -> EquilibriumReport:
    """Minimize the defender's loss over all mixes of k-subsets.

    The loss is the upper envelope of linear functions, one per attacker
    policy (signal -> allocation).  Kelley's cutting-plane method keeps a
    growing set of policies, solves the restricted minimax as a linear
    program and adds the best response to each new mix until the response
    gains less than ``tol`` over the restricted optimum.  The dual of the
    final program is the attacker's equilibrium mix over stored policies.
    """
    spec = validate_spec(spec)
    _check_general(spec)
    configs = k_subsets(spec.n, spec.k)
    model = _LossModel(spec, configs)
    G = len(configs)

    cuts = []
    seen = set()

    def add_cut(alloc):
        g = model.cut(alloc)
        key = g.round(14).tobytes()
        if key not in seen:
            seen.add(key)
            cuts.append(g)

    start = np.full(G, 1.0 / G)
    best_val, alloc, _, _ = model.evaluate(start)
    best_mix = start
    add_cut(alloc)
    for g in range(G):
        vertex = np.zeros(G)
        vertex[g] = 1.0
        add_cut(model.evaluate(vertex)[1])

    c_obj = np.zeros(G + 1)
    c_obj[-1] = 1.0
    A_eq = np.concatenate((np.ones(G), [0.0]))[None, :]
    bounds = [(0.0, 1.0)] * G + [(None, None)]
    for it in range(1, max_iter + 1):
        A_ub = np.hstack((np.array(cuts), -np.ones((len(cuts), 1))))
        res = linprog(c_obj, A_ub=A_ub, b_ub=np.zeros(len(cuts)), A_eq=A_eq, b_eq=[1.0],
                      bounds=bounds, method="highs")
        if res.status != 0:
            raise NonConvergenceError(f"linear program failed: {res.message}",
                                      DefenderMix(tuple(configs), tuple(best_mix)), best_val)
        probs = np.clip(res.x[:G], 0.0, None)
        probs /= probs.sum()
        lower = res.x[-1]
        val, alloc, w, _ = model.evaluate(probs)
        if val < best_val:
            best_val, best_mix = val, probs
        if val - lower <= tol:
            break
        add_cut(alloc)
    else:
        raise NonConvergenceError(f"no convergence after {max_iter} iterations",
                                  DefenderMix(tuple(configs), tuple(best_mix)), best_val)

    duals = -np.asarray(res.ineqlin.marginals)
    duals = np.clip(duals, 0.0, None)
    duals /= duals.sum()
    damage = duals @ np.array(cuts)
    mix = DefenderMix(tuple(configs), tuple(probs))
    site_loss = tie_averaged(w, w * model.hit[alloc]).sum(axis=0)
    config_losses = {cfg: float(d) for cfg, d in zip(configs, damage)}
    used = [d for d, w in zip(damage, probs) if w > PROTECT_THRESHOLD]
    beta = mix.lock_marginals(spec.n)
    protected = tuple(i + 1 for i in range(spec.n) if beta[i] > PROTECT_THRESHOLD)
    return EquilibriumReport(
        mix=mix, value=float(val), per_site_loss=site_loss,
        protected_set=protected, indifference_gap=float(max(used) - min(used)),
        config_losses=config_losses,
        extras={"iterations": it, "lower_bound": float(lower), "cuts": len(cuts),
                "attacker_policies": int(np.count_nonzero(duals > PROTECT_THRESHOLD))})


def loss(spec: GameSpec, probs, configs=None) -> float:
    """Defender loss for a mix given as probabilities over ``configs`` (default: all k-subsets)."""
    spec = validate_spec(spec)
    configs = configs if configs is not None else k_subsets(spec.n, spec.k)
    return _LossModel(spec, configs).evaluate(np.asarray(probs, dtype=float))[0]


def max_pairwise_descent(spec: GameSpec, mix: DefenderMix, step: float = 1e-3) -> float:
    """Largest loss decrease from moving ``step`` mass between two configurations.

    Configs outside ``mix`` are included with probability zero; the move
    from a config is capped by its own mass.
    """
    spec = validate_spec(spec)
    configs = k_subsets(spec.n, spec.k)
    model = _LossModel(spec, configs)
    probs = np.zeros(len(configs))
    index = {cfg: i for i, cfg in enumerate(configs)}
    for cfg, w in mix.support:
        probs[index[cfg]] += w
    base = model.evaluate(probs)[0]
    moves = []
    for src in range(len(configs)):
        amount = min(step, probs[src])
        if amount <= 0:
            continue
        for dst in range(len(configs)):
            if dst == src:
                continue
            moved = probs.copy()
            moved[src] -= amount
            moved[dst] += amount
            moves.append(moved)
    if not moves:
        return 0.0
    vals = model.evaluate_many(np.array(moves))
    return float(max(0.0, base - vals.min()))
