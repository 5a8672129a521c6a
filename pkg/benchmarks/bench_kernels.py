"""Benchmark the numba kernels against the pure-numpy fallback.

Runs each hot kernel on a 41x41 lattice workload, checks the two paths
produce bit-identical output, and prints timings with the speedup.

    python3 benchmarks/bench_kernels.py [--walks N] [--repeat K]
"""

import argparse
import time

import numpy as np

from einstein_lab import _kernels
from einstein_lab.generators import lattice_box
from einstein_lab.graph import ball


def timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--walks", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba unavailable: nothing to compare against")

    g, c = lattice_box(2, 41)
    prof = g.transition_profile()
    in_region = np.zeros(g.vertex_count, dtype=bool)
    in_region[ball(g, c, 8)] = True

    print(f"host: 41x41 lattice, {args.walks} walks from the center of "
          f"B(c,8), {args.repeat} repeats (best shown)\n")
    print(f"{'kernel':<18}{'numpy':>12}{'numba':>12}{'speedup':>10}")

    sim_args = (g.indptr, g.indices, prof, in_region, c,
                args.walks, 100_000, 12345)
    _kernels.simulate_exits_numba(*sim_args)      # compile outside timing
    t_np, out_np = timeit(lambda: _kernels.simulate_exits_numpy(*sim_args),
                          args.repeat)
    t_nb, out_nb = timeit(lambda: _kernels.simulate_exits_numba(*sim_args),
                          args.repeat)
    assert np.array_equal(out_np[0], out_nb[0])
    assert np.array_equal(out_np[1], out_nb[1])
    print(f"{'walk simulation':<18}{t_np:>11.4f}s{t_nb:>11.4f}s"
          f"{t_np / t_nb:>9.1f}x")

    sources = list(range(0, g.vertex_count, 7))
    _kernels.bfs_distances_numba(g.indptr, g.indices, 0, g.vertex_count)

    def bfs_all(fn):
        return np.stack([fn(g.indptr, g.indices, s, g.vertex_count)
                         for s in sources])

    t_np, d_np = timeit(lambda: bfs_all(_kernels.bfs_distances_numpy),
                        args.repeat)
    t_nb, d_nb = timeit(lambda: bfs_all(_kernels.bfs_distances_numba),
                        args.repeat)
    assert np.array_equal(d_np, d_nb)
    print(f"{'bfs x' + str(len(sources)):<18}{t_np:>11.4f}s{t_nb:>11.4f}s"
          f"{t_np / t_nb:>9.1f}x")
    print("\nboth kernels produced bit-identical results")


if __name__ == "__main__":
    main()
