#!/usr/bin/env python3
"""numba vs numpy timings for the WSP search and the streaming-moments kernels.

Both paths must agree on every input; the script checks that before timing.
Run: python3 benchmarks/bench_kernels.py
"""
import time

import numpy as np

from acsim import kernels


def worst_case(n_steps, n_actors):
    # a chain of != constraints plus an = that can never hold: forces a full scan
    dom = np.tile(np.arange(n_actors, dtype=np.int64), (n_steps, 1))
    dsize = np.full(n_steps, n_actors, np.int64)
    ca = np.arange(n_steps - 1, dtype=np.int64)
    cb = ca + 1
    ckind = np.ones(n_steps - 1, np.int64)
    ckind = np.append(ckind, 0)
    ca = np.append(ca, 0)
    cb = np.append(cb, 1)
    return dom, dsize, ckind, ca, cb


def best_of(fn, reps=3):
    best = float("inf")
    out = None
    for _ in range(reps):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    if not kernels.HAVE_NUMBA:
        print("numba is not installed; nothing to compare")
        return
    print("Warming up numba...")
    t0 = time.perf_counter()
    kernels._search_jit(*worst_case(2, 2))
    kernels._moments_jit(np.ones(4))
    print(f"JIT warmup: {time.perf_counter() - t0:.2f}s\n")

    print("WSP exhaustive search (unsatisfiable, full scan)")
    print(f"{'steps':>5} {'actors':>6} {'candidates':>11} {'numpy (s)':>10} {'numba (s)':>10} {'speedup':>8}")
    for steps, actors in [(3, 10), (4, 10), (5, 10), (4, 30), (6, 10)]:
        args = worst_case(steps, actors)
        t_np, r_np = best_of(lambda: kernels.search_numpy(*args))
        t_nb, r_nb = best_of(lambda: kernels._search_jit(*args))
        assert (bool(r_np[0]), int(r_np[1])) == (bool(r_nb[0]), int(r_nb[1])), (r_np, r_nb)
        print(f"{steps:>5} {actors:>6} {r_np[1]:>11} {t_np:>10.4f} {t_nb:>10.4f} {t_np / t_nb:>7.1f}x")

    print("\nStreaming moments")
    print(f"{'n':>9} {'numpy (s)':>10} {'numba (s)':>10} {'speedup':>8}")
    rng = np.random.default_rng(0)
    for n in [10**3, 10**5, 10**7]:
        x = rng.exponential(size=n)

        def np_path():
            m = x.mean()
            return x.size, m, ((x - m) ** 2).sum(), x.min(), x.max()

        t_np, a = best_of(np_path)
        t_nb, b = best_of(lambda: kernels._moments_jit(x))
        assert a[0] == b[0] and np.allclose(a[1:], b[1:], rtol=1e-9), (a, b)
        print(f"{n:>9} {t_np:>10.4f} {t_nb:>10.4f} {t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
