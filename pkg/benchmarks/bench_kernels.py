"""Time the batched scalar inverse solvers on the numba and numpy backends.

    python benchmarks/bench_kernels.py [-n 100000] [--repeat 5]

The numba column is skipped when numba is missing or LFLOWS_DISABLE_NUMBA is set.
"""
import argparse
import timeit

import numpy as np

from lflows import Activation, Localization, backend
from lflows._kernels import solve_planar, solve_radial


def cases(n, rng):
    y = rng.normal(size=n) * 3
    r = np.abs(rng.normal(size=n)) * 3
    return {
        "planar relu": lambda nb: solve_planar(y, -0.5, 0.2, Activation("relu"), use_numba=nb),
        "planar elu(2)": lambda nb: solve_planar(y, -0.4, 0.0, Activation("elu", 2.0), use_numba=nb),
        "planar tanh": lambda nb: solve_planar(y, -0.9, 0.1, Activation("tanh"), use_numba=nb),
        "radial inverse": lambda nb: solve_radial(r, -0.8, Localization("inverse", alpha=1.0), use_numba=nb),
        "radial tabulated": lambda nb: solve_radial(
            r, 0.5, Localization("tabulated", r=(0, 0.5, 1, 2, 4), h=(1, 0.8, 0.5, 0.2, 0.05)), use_numba=nb
        ),
    }


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("-n", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    have_numba = backend() == "numba"

    print(f"n = {args.n}, best of {args.repeat}, backend = {backend()}")
    print(f"{'kernel':<18}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    for name, run in cases(args.n, np.random.default_rng(args.seed)).items():
        t_np = best_of(lambda: run(False), args.repeat)
        if have_numba:
            lam_nb, _ = run(True)  # also warms the jit cache
            lam_np, _ = run(False)
            assert np.allclose(lam_nb, lam_np, rtol=0, atol=1e-9), name
            t_nb = best_of(lambda: run(True), args.repeat)
            print(f"{name:<18}{t_np * 1e3:>12.2f}{t_nb * 1e3:>12.2f}{t_np / t_nb:>9.1f}x")
        else:
            print(f"{name:<18}{t_np * 1e3:>12.2f}{'-':>12}{'-':>10}")


if __name__ == "__main__":
    main()
