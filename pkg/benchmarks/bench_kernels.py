#!/usr/bin/env python3
"""Benchmark the compiled kernel backend against the pure-numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--paths 20000] [--steps 200]
                                       [--repeats 5]

Each kernel is timed on identical pre-drawn matrices, best-of-N wall
clock, and the outputs are cross-checked so a speedup never comes from
computing something different.
"""

import argparse
import time

import numpy as np

from perpsim.kernels import get_backend
from perpsim.laws import Exponential, Independent, Normal


def _time(fn, *args, repeats):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--paths", type=int, default=20_000)
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    try:
        compiled = get_backend("compiled")
    except ImportError:
        raise SystemExit("compiled backend not built; run "
                         "`pip install -e . --no-build-isolation` first")
    numpy_be = get_backend("numpy")

    rng = np.random.default_rng(args.seed)
    joint = Independent(Normal(-0.5, 1.0), Exponential(1.0))
    xi, eta = joint.sample(rng, (args.paths, args.steps))
    xi = np.ascontiguousarray(xi, dtype=float)
    eta = np.ascontiguousarray(eta, dtype=float)
    with np.errstate(divide="ignore"):
        log_eta = np.log(eta)

    cases = [
        ("paths", (xi, eta)),
        ("log_paths", (xi, log_eta)),
        ("dual_max", (xi, eta)),
        ("associated", (xi, eta)),
    ]

    cells = args.paths * args.steps
    print(f"{args.paths} paths x {args.steps} steps "
          f"({cells / 1e6:.1f}M cells), best of {args.repeats}")
    print(f"{'kernel':<12} {'compiled':>12} {'numpy':>12} {'speedup':>9}")
    for name, data in cases:
        tc, out_c = _time(getattr(compiled, name), *data,
                          repeats=args.repeats)
        tn, out_n = _time(getattr(numpy_be, name), *data,
                          repeats=args.repeats)
        for a, b in zip(np.atleast_1d(out_c), np.atleast_1d(out_n)):
            np.testing.assert_allclose(a, b, rtol=1e-11, atol=1e-300)
        print(f"{name:<12} {tc * 1e3:>10.1f}ms {tn * 1e3:>10.1f}ms "
              f"{tn / tc:>8.1f}x")


if __name__ == "__main__":
    main()
