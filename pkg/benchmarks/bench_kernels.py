"""Time every kernel under both backends and check they agree.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Numba timings exclude the first (compiling) call.
"""
import argparse
import time

import numpy as np

from lbtgame import _kernels
from lbtgame.equilibrium import solve_general
from lbtgame.model import DefenderMix, GameSpec, explosion_table, signal_bits
from lbtgame.oracle import simulate


def best_of(fn, repeat):
    fn()  # warm-up / JIT
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def kernel_cases():
    rng = np.random.default_rng(0)
    n, size, m = 8, 200_000, 12
    mix = DefenderMix.from_probs(n, 3, rng.dirichlet(np.ones(56)))
    locks = mix.lock_matrix(n)
    a, b, c = rng.uniform(0.5, 1, n), rng.uniform(0.5, 1, n), rng.uniform(0.5, 4, n)
    weights = rng.random((50_000, n))
    qpow = 0.6 ** np.arange(m + 1)
    bits = signal_bits(n)
    u_cfg, u_sig, u_exp = rng.random(size), rng.random((size, n)), rng.random((size, n))
    cum = np.cumsum(mix.prob_array())
    alloc = rng.integers(0, 3, size=(size, n))
    hit = explosion_table(m, 0.4)
    locked, _ = _kernels.NUMPY.sample_locks_signals(u_cfg, u_sig, cum, locks, a, b)
    return {
        "greedy_allocate 50k x 8, m=12":
            lambda be: be.greedy_allocate(weights, qpow, 0.4, m),
        "likelihood_matrix 256 x 56":
            lambda be: be.likelihood_matrix(bits, locks, a, b),
        "sample_locks_signals 200k":
            lambda be: be.sample_locks_signals(u_cfg, u_sig, cum, locks, a, b),
        "realized_damage 200k":
            lambda be: be.realized_damage(locked, alloc, u_exp, c, hit),
    }


def same(x, y):
    if isinstance(x, tuple):
        return all(np.array_equal(u, v) for u, v in zip(x, y))
    return np.array_equal(x, y)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not _kernels.HAS_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    print(f"{'kernel':36s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}  identical")
    for name, fn in kernel_cases().items():
        t_np, r_np = best_of(lambda: fn(_kernels.NUMPY), args.repeat)
        t_nb, r_nb = best_of(lambda: fn(_kernels.NUMBA), args.repeat)
        print(f"{name:36s} {t_np * 1e3:10.2f} {t_nb * 1e3:10.2f} {t_np / t_nb:8.1f}  {same(r_np, r_nb)}")

    spec = GameSpec.fixed(3, 1, 2, (0.8, 0.7, 0.9), 0.75, (3, 2, 1), 0.6)
    mix = solve_general(spec).mix
    for backend in ("numpy", "numba"):
        t, res = best_of(lambda: simulate(spec, mix, "greedy-best-response", 10 ** 6, 1,
                                          backend=backend), max(1, args.repeat // 2))
        print(f"simulate 1e6 trials [{backend}]: {t:.2f}s  mean={res.mean!r}")


if __name__ == "__main__":
    main()
