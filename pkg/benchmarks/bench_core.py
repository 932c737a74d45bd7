"""Compiled kernels against their pure-Python twins.

    python benchmarks/bench_core.py [--t-end 20] [--repeat 3]
"""

import argparse
import time

import numpy as np

from dflorenz import _core_py

try:
    from dflorenz import _core
except ImportError:
    _core = None


def _best(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--t-end", type=float, default=20.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    n = int(args.t_end / 0.5)
    x0 = np.array([1.0, 1.0, 1.0])
    cases = {
        "lorenz_run (tangent)": lambda m: m.lorenz_run(x0, 0.5, n, 10.0, 28.0, 8.0 / 3.0, 1e-10, 1e-12, 0.5, True),
        "fiber_transit x200": lambda m: [m.fiber_transit(0.05, 0.7, 3.0, 2, 2.0, 5.0, 0.1, 0.2, 0.4, 1e-10, 1e-12) for _ in range(200)],
    }
    print(f"{'kernel':24s} {'python [s]':>11s} {'compiled [s]':>13s} {'speedup':>8s} {'max diff':>10s}")
    for name, fn in cases.items():
        tp, rp = _best(lambda: fn(_core_py), args.repeat)
        if _core is None:
            print(f"{name:24s} {tp:11.4f} {'n/a':>13s}")
            continue
        tc, rc = _best(lambda: fn(_core), args.repeat)
        if isinstance(rp, tuple):
            diff = max(float(np.max(np.abs(np.asarray(a) - np.asarray(b)))) for a, b in zip(rp[:2], rc[:2]))
        else:
            diff = max(abs(a[0] - b[0]) for a, b in zip(rp, rc))
        print(f"{name:24s} {tp:11.4f} {tc:13.5f} {tp / tc:8.1f} {diff:10.2e}")


if __name__ == "__main__":
    main()
