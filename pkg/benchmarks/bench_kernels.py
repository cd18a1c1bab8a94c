"""Time the compiled pair-sum core against the numpy fallback.

    python benchmarks/bench_kernels.py [--sizes 64 128 256] [--p 2 3] [--repeat 5]

Prints one row per (N, p, operation) with the best-of-``repeat`` wall time of
each backend, the speedup, and the largest relative difference between them.
"""

import argparse
import timeit

import numpy as np

from fracp_lab._backend import HAVE_COMPILED
from fracp_lab.grid import Domain, build_grid
from fracp_lab.kernel import KernelContext


def bench(N, p, repeat, s=0.2):
    g = build_grid(Domain.interval(0, 1), N)
    ctxs = {b: KernelContext(g, s, p, b) for b in ("python", "compiled")}
    u, v = np.random.default_rng(0).normal(size=(2, g.size))
    ops = {
        "energy": lambda c: c.gagliardo_p(u),
        "weak": lambda c: c.weak_apply(u, v),
        "gradient": lambda c: c.operator_gradient(u),
    }
    rows = []
    for name, op in ops.items():
        t = {b: min(timeit.repeat(lambda c=c: op(c), number=1, repeat=repeat)) for b, c in ctxs.items()}
        a, b = np.atleast_1d(op(ctxs["python"])), np.atleast_1d(op(ctxs["compiled"]))
        diff = float(np.max(np.abs(a - b)) / max(np.max(np.abs(a)), 1e-300))
        rows.append((N, p, name, t["python"], t["compiled"], t["python"] / t["compiled"], diff))
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256])
    ap.add_argument("--p", type=float, nargs="+", default=[2.0, 3.0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not HAVE_COMPILED:
        raise SystemExit("compiled core not built; reinstall with Cython available")
    print(f"{'N':>5} {'p':>4} {'op':>9} {'python [s]':>12} {'compiled [s]':>13} {'speedup':>8} {'rel diff':>9}")
    for N in args.sizes:
        for p in args.p:
            for r in bench(N, p, args.repeat):
                print(f"{r[0]:5d} {r[1]:4g} {r[2]:>9} {r[3]:12.3e} {r[4]:13.3e} {r[5]:8.2f} {r[6]:9.1e}")


if __name__ == "__main__":
    main()
