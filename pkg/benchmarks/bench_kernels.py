"""Compare the compiled and pure-Python tridiagonal kernels.

    python3 benchmarks/bench_kernels.py [--sizes 100 400 1600] [--steps 400]

Prints the best-of-``repeat`` wall time per backend and the speedup, and
checks that both backends return the same trajectory.
"""

import argparse
import timeit

import numpy as np

from driftlab import _kernels_py

try:
    from driftlab import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None


def problem(n, steps, seed=0):
    rng = np.random.default_rng(seed)
    lower = -rng.uniform(0.0, 1.0, (steps + 1, n))
    upper = -rng.uniform(0.0, 1.0, (steps + 1, n))
    diag = 1.0 + np.abs(lower) + np.abs(upper)
    forcing = rng.normal(size=(steps + 1, n)) * 1e-2
    return lower, diag, upper, rng.normal(size=n), forcing


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[100, 400, 1600])
    ap.add_argument("--steps", type=int, default=400)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = {"python": _kernels_py}
    if _compiled is not None:
        backends["cython"] = _compiled
    print(f"{'kernel':<10}{'N':>7}{'K':>6}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for n in args.sizes:
        lo, di, up, u0, fo = problem(n, args.steps)
        for kernel in ("march", "adjoint"):
            times, outs = {}, {}
            for name, mod in backends.items():
                fn = mod.march_tridiagonal if kernel == "march" else mod.march_tridiagonal_adjoint
                outs[name] = fn(lo, di, up, u0, fo)
                times[name] = min(timeit.repeat(lambda: fn(lo, di, up, u0, fo),
                                                number=1, repeat=args.repeat))
            if len(outs) == 2:
                assert np.allclose(outs["python"], outs["cython"], rtol=1e-12, atol=1e-14)
            speed = times["python"] / times["cython"] if "cython" in times else float("nan")
            print(f"{kernel:<10}{n:>7}{args.steps:>6}"
                  + "".join(f"{times[b] * 1e3:>10.2f}ms" for b in backends) + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()
