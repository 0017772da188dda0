"""Compare the numba and numpy paths of the hot kernels.

    python benchmarks/bench_kernels.py [--repeat 20]
"""
import argparse
import time

import numpy as np

from polyvem import _kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_monomials(repeat, degree=10, n_points=4000):
    rng = np.random.default_rng(0)
    sx, sy = rng.uniform(-0.5, 0.5, (2, n_points))
    _kernels.monomial_table_numba(sx, sy, degree)  # compile
    t_nb = best_of(lambda: _kernels.monomial_table_numba(sx, sy, degree), repeat)
    t_np = best_of(lambda: _kernels.monomial_table_numpy(sx, sy, degree), repeat)
    return t_nb, t_np


def bench_scatter(repeat, n_global=4000, n_cells=64, n_local=90):
    rng = np.random.default_rng(1)
    locs = rng.standard_normal((n_cells, n_local, n_local))
    idxs = [rng.choice(n_global, n_local, replace=False) for _ in range(n_cells)]

    def run(fn):
        K = np.zeros((n_global, n_global))
        for loc, idx in zip(locs, idxs):
            fn(K, loc, idx)

    run(_kernels.scatter_add_numba)
    return best_of(lambda: run(_kernels.scatter_add_numba), repeat), best_of(lambda: run(_kernels.scatter_add_numpy), repeat)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    print(f"{'kernel':<16}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}")
    for name, (t_nb, t_np) in (("monomial_table", bench_monomials(args.repeat)), ("scatter_add", bench_scatter(args.repeat))):
        print(f"{name:<16}{1e3 * t_nb:>12.3f}{1e3 * t_np:>12.3f}{t_np / t_nb:>10.2f}")


if __name__ == "__main__":
    main()
