"""Time the numba and numpy flavours of the hot kernels at the default grid size.

Usage::

    python3 benchmarks/bench_kernels.py [--n 896] [--m 256] [--repeat 20]
"""
import argparse
import os
import timeit

import numpy as np

from fracim import _kernels as kn
from fracim.eigenbasis import load_eigenbasis
from fracim.emdfrft import eigen_coefficients, emdfrft


def best_of(fn, repeat):
    fn()  # warm-up (and numba compile)
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=896)
    ap.add_argument("--m", type=int, default=256)
    ap.add_argument("--g", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    basis = load_eigenbasis(args.n)
    x = rng.standard_normal(args.n) + 1j * rng.standard_normal(args.n)
    rho = eigen_coefficients(basis, x)
    plan = kn.FoldPlan(basis.eigen_index, args.m)
    n_cols = args.n // 2 + 1
    idx = np.arange(2 * args.g + 1)
    vals = rng.standard_normal(idx.size) + 1j * rng.standard_normal(idx.size)
    grid = emdfrft(basis, rho, args.m).s

    cases = {
        "fold_columns": lambda u: kn.fold_columns(basis.v, rho, plan, n_cols, use_numba=u),
        "sparse_project": lambda u: kn.sparse_project(basis.v, idx, vals, use_numba=u),
        "abs2": lambda u: kn.abs2(grid, use_numba=u),
        "emdfrft": lambda u: emdfrft(basis, rho, args.m, use_numba=u),
    }
    print(f"N={args.n} M={args.m} G={args.g} numba available: {kn.HAVE_NUMBA} "
          f"(FRACIM_NUMBA={os.environ.get('FRACIM_NUMBA', 'unset')})")
    print(f"{'kernel':16s}{'numpy ms':>12s}{'numba ms':>12s}{'speedup':>10s}")
    for name, fn in cases.items():
        t_np = best_of(lambda: fn(False), args.repeat)
        if kn.HAVE_NUMBA:
            t_nb = best_of(lambda: fn(True), args.repeat)
            print(f"{name:16s}{1e3 * t_np:12.3f}{1e3 * t_nb:12.3f}{t_np / t_nb:10.2f}")
        else:
            print(f"{name:16s}{1e3 * t_np:12.3f}{'-':>12s}{'-':>10s}")


if __name__ == "__main__":
    main()
