"""Hot numeric loops, each in a numba and a pure-numpy flavour.

The numba versions are used when numba imports cleanly and the
``LBT_DISABLE_NUMBA`` environment variable is unset (or ``0``).  Both
flavours produce bit-identical results: they share the power table
``qpow`` and accumulate per-trial sums in site order.
"""
from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

try:
    import numba
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and os.environ.get("LBT_DISABLE_NUMBA", "0").lower() in ("", "0", "false", "no")


# ---------------------------------------------------------------- numpy path

def greedy_allocate_numpy(weights, qpow, p, m):
    """Allocate ``m`` bombs per row, each to the site of largest marginal gain.

    ``weights[s, i]`` is the (possibly unnormalized) payoff of destroying
    site ``i`` under row ``s``; the gain of the next bomb at a site holding
    ``u`` bombs is ``weights * qpow[u] * p``.  Ties go to the lowest index.
    """
    rows, n = weights.shape
    alloc = np.zeros((rows, n), dtype=np.int64)
    r = np.arange(rows)
    for _ in range(m):
        gains = weights * qpow[alloc] * p
        best = np.argmax(gains, axis=1)
        alloc[r, best] += 1
    return alloc


def likelihood_matrix_numpy(bits, locks, a, b):
    """``out[s, g] = P(signal s | lock config g)`` for independent site tests."""
    out = np.ones((bits.shape[0], locks.shape[0]))
    for i in range(bits.shape[1]):
        plus = bits[:, i][:, None]
        locked = locks[:, i][None, :]
        term = np.where(plus,
                        np.where(locked, a[i], 1.0 - b[i]),
                        np.where(locked, 1.0 - a[i], b[i]))
        out *= term
    return out


def sample_locks_signals_numpy(u_cfg, u_sig, cum_probs, locks, a, b):
    """Draw a lock configuration and a signal per trial from uniforms."""
    idx = np.searchsorted(cum_probs, u_cfg, side="right")
    idx = np.minimum(idx, locks.shape[0] - 1)
    locked = locks[idx]
    p_plus = np.where(locked, a[None, :], 1.0 - b[None, :])
    plus = u_sig < p_plus
    n = locks.shape[1]
    sig = np.zeros(len(u_cfg), dtype=np.int64)
    for i in range(n):
        sig += plus[:, i].astype(np.int64) << i
    return locked, sig


def realized_damage_numpy(locked, alloc, u_exp, c, hit_table):
    """Destroyed value per trial; ``hit_table[u]`` is P(explosion | u bombs)."""
    destroyed = (~locked) & (u_exp < hit_table[alloc])
    out = np.zeros(locked.shape[0])
    for i in range(locked.shape[1]):
        out += np.where(destroyed[:, i], c[i], 0.0)
    return out


# ---------------------------------------------------------------- numba path

if HAS_NUMBA:
    @numba.njit(cache=True, nogil=True)
    def greedy_allocate_numba(weights, qpow, p, m):
        rows, n = weights.shape
        alloc = np.zeros((rows, n), dtype=np.int64)
        for s in range(rows):
            for _ in range(m):
                best = 0
                best_gain = weights[s, 0] * qpow[alloc[s, 0]] * p
                for i in range(1, n):
                    g = weights[s, i] * qpow[alloc[s, i]] * p
                    if g > best_gain:
                        best_gain = g
                        best = i
                alloc[s, best] += 1
        return alloc

    @numba.njit(cache=True, nogil=True)
    def likelihood_matrix_numba(bits, locks, a, b):
        S, n = bits.shape
        G = locks.shape[0]
        out = np.ones((S, G))
        for s in range(S):
            for g in range(G):
                acc = 1.0
                for i in range(n):
                    if bits[s, i]:
                        acc *= a[i] if locks[g, i] else 1.0 - b[i]
                    else:
                        acc *= 1.0 - a[i] if locks[g, i] else b[i]
                out[s, g] = acc
        return out

    @numba.njit(cache=True, nogil=True)
    def sample_locks_signals_numba(u_cfg, u_sig, cum_probs, locks, a, b):
        T = u_cfg.shape[0]
        G, n = locks.shape
        locked = np.zeros((T, n), dtype=np.bool_)
        sig = np.zeros(T, dtype=np.int64)
        for t in range(T):
            g = np.searchsorted(cum_probs, u_cfg[t], side="right")
            if g > G - 1:
                g = G - 1
            code = 0
            for i in range(n):
                lk = locks[g, i]
                locked[t, i] = lk
                thr = a[i] if lk else 1.0 - b[i]
                if u_sig[t, i] < thr:
                    code += 1 << i
            sig[t] = code
        return locked, sig

    @numba.njit(cache=True, nogil=True)
    def realized_damage_numba(locked, alloc, u_exp, c, hit_table):
        T, n = locked.shape
        out = np.zeros(T)
        for t in range(T):
            acc = 0.0
            for i in range(n):
                if (not locked[t, i]) and u_exp[t, i] < hit_table[alloc[t, i]]:
                    acc += c[i]
            out[t] = acc
        return out


NUMPY = SimpleNamespace(
    name="numpy",
    greedy_allocate=greedy_allocate_numpy,
    likelihood_matrix=likelihood_matrix_numpy,
    sample_locks_signals=sample_locks_signals_numpy,
    realized_damage=realized_damage_numpy,
)

if HAS_NUMBA:
    NUMBA = SimpleNamespace(
        name="numba",
        greedy_allocate=greedy_allocate_numba,
        likelihood_matrix=likelihood_matrix_numba,
        sample_locks_signals=sample_locks_signals_numba,
        realized_damage=realized_damage_numba,
    )
else:  # pragma: no cover
    NUMBA = None


def get_backend(name: str | None = None) -> SimpleNamespace:
    """Return the kernel namespace for ``name`` (``"numba"``/``"numpy"``) or the default."""
    if name is None:
        return NUMBA if USE_NUMBA else NUMPY
    if name == "numpy":
        return NUMPY
    if name == "numba":
        if NUMBA is None:
            raise RuntimeError("numba is not available")
        return NUMBA
    raise ValueError(f"unknown backend {name!r}")


def greedy_allocate(weights, qpow, p, m):
    be = get_backend()
    return be.greedy_allocate(np.ascontiguousarray(weights, dtype=np.float64),
                              np.ascontiguousarray(qpow, dtype=np.float64), float(p), int(m))


def likelihood_matrix(bits, locks, a, b):
    be = get_backend()
    return be.likelihood_matrix(np.ascontiguousarray(bits, dtype=np.bool_),
                                np.ascontiguousarray(locks, dtype=np.bool_),
                                np.ascontiguousarray(a, dtype=np.float64),
                                np.ascontiguousarray(b, dtype=np.float64))
