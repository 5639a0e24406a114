"""Compiled vs pure-Python flow kernel.

Integrates the torus-neck trajectory with its monodromy block over a range
of horizons and reports wall time per backend and the maximal difference
between the two final states.

    python3 benchmarks/bench_flow.py [--repeat 3]
"""
import argparse
import math
import time

import numpy as np

from nhtrap import kernels
from nhtrap._flow_py import CIRCLE, TORUS


def cases():
    beta = 0.3
    a = 1 - beta
    yield "circle", (CIRCLE, 1.0, 0.0, 0.0), np.array([0.0, 0.0, 0.0, 1.0]), 4
    yield "torus", (TORUS, 1.0, beta, 0.0), np.array([0.0, math.pi + 1e-3, 0.0, 0.0, 0.0, a]), 6


def timed(backend, params, y0, n, horizon, repeat):
    best = math.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = kernels.integrate_warped(params, y0, np.eye(n), 0.0, horizon, 1e-10, 1e-10, 10.0,
                                       store=False, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--horizons", type=float, nargs="+", default=[10.0, 50.0])
    args = ap.parse_args()
    if not kernels.compiled_available():
        print("compiled kernel not built; only the Python backend is available")
    print(f"{'case':8s} {'T':>6s} {'python [s]':>11s} {'compiled [s]':>13s} {'speedup':>8s} {'max |dy|':>10s}")
    for name, params, y0, n in cases():
        for T in args.horizons:
            tp, outp = timed("python", params, y0, n, T, args.repeat)
            if kernels.compiled_available():
                tc, outc = timed("compiled", params, y0, n, T, args.repeat)
                diff = float(np.max(np.abs(outp[1][-1] - outc[1][-1])))
                print(f"{name:8s} {T:6.0f} {tp:11.4f} {tc:13.4f} {tp / tc:8.1f} {diff:10.2e}")
            else:
                print(f"{name:8s} {T:6.0f} {tp:11.4f} {'-':>13s} {'-':>8s} {'-':>10s}")


if __name__ == "__main__":
    main()
