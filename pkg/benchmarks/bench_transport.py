#!/usr/bin/env python3
"""Benchmark the compiled transport kernel against the pure-Python one.

Both backends are expression-for-expression mirrors and produce
bit-identical absorbed-energy maps; this script checks that equality on
the benchmark workload and reports packets/second for each.

Usage: python3 benchmarks/bench_transport.py [--photons N] [--repeat R]
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from spaox.phantom import PhantomConfig, build_volume  # noqa: E402
from spaox.transport import TransportConfig, simulate  # noqa: E402
from spaox.transport import engine, reference  # noqa: E402


def bench(volume, backend, n_photons, repeat):
    best = None
    result = None
    for _ in range(repeat):
        cfg = TransportConfig(n_photons=n_photons, seed=1)
        t0 = time.perf_counter()
        result = simulate(volume, 700.0, config=cfg, backend=backend)
        dt = time.perf_counter() - t0
        best = dt if best is None else min(best, dt)
    return result, best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--photons", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    volume = build_volume(PhantomConfig(grid_dims=(64, 64, 64), vessel_min_row=25, seed=7))

    backends = [("pure-python", reference)]
    if engine._compiled is not None:
        backends.append(("compiled", engine._compiled))
    else:
        print("compiled kernel not available; benchmarking pure Python only")

    results = {}
    for name, backend in backends:
        res, dt = bench(volume, backend, args.photons, args.repeat)
        results[name] = res
        print(f"{name:12s} {args.photons / dt:>10.0f} packets/s "
              f"(best of {args.repeat}, {dt:.2f} s)")

    if len(results) == 2:
        a, b = results["pure-python"], results["compiled"]
        identical = (
            np.array_equal(a.grid, b.grid)
            and a.escaped_weight == b.escaped_weight
            and a.clipped_launches == b.clipped_launches
        )
        print(f"bit-identical outputs: {identical}")
        if not identical:
            return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
