"""Benchmark the compiled extension lane against the pure-numpy lane.

Both lanes are bit-identical by construction; this script measures the
speed difference and re-verifies equality on the benchmarked outputs.

Run:  python3 benchmarks/bench_backends.py
"""

import time

import numpy as np

from stickymc import _ref
from stickymc.backend import HAVE_EXT
from stickymc.rng import child_keys, derive_stream


def timeit(fn, repeat=3):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_evolve(impl, n_steps):
    key = derive_stream(7, [n_steps]).key
    return timeit(lambda: impl.evolve_kernel(key, n_steps, 1, 0.21132486540518708))


def bench_two_point(impl, reps, n_steps):
    s = derive_stream(11, [])
    ids = np.arange(reps, dtype=np.uint64)
    kw = child_keys(s.child(1), ids)
    ks = child_keys(s.child(2), ids)
    kg = child_keys(s.child(3), ids)
    idx = np.array([n_steps], dtype=np.int64)
    return timeit(
        lambda: impl.two_point_batch(kw, ks, kg, n_steps, 1.0 / n_steps, 2.0, idx),
        repeat=2,
    )


def main():
    if not HAVE_EXT:
        print("compiled extension not built; nothing to compare")
        return
    from stickymc import _ext

    print(f"{'benchmark':<34}{'python':>10}{'ext':>10}{'speedup':>9}  identical")
    for n in (512, 2048, 4096):
        t_py, k_py = bench_evolve(_ref, n)
        t_ex, k_ex = bench_evolve(_ext, n)
        same = np.array_equal(k_py, k_ex)
        print(f"{'evolve_kernel n=' + str(n):<34}{t_py:>9.3f}s{t_ex:>9.3f}s"
              f"{t_py / t_ex:>8.1f}x  {same}")
    for reps, n in ((200, 1000), (1000, 1000)):
        t_py, o_py = bench_two_point(_ref, reps, n)
        t_ex, o_ex = bench_two_point(_ext, reps, n)
        same = all(np.array_equal(a, b) for a, b in zip(o_py, o_ex))
        label = f"two_point_batch reps={reps} n={n}"
        print(f"{label:<34}{t_py:>9.3f}s{t_ex:>9.3f}s{t_py / t_ex:>8.1f}x  {same}")


if __name__ == "__main__":
    main()
