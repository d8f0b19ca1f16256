"""Cost of refinement: materialized affinity versus block algebra.

The reference path lifts each (r, r, r, r) self-attention tensor to a dense
(N^2, N^2) affinity before applying it. The block path exploits the lift's
structure (bilinear key upsample is a fixed linear map; query replication
makes rows repeat) and never allocates anything larger than (r^2, N^2).
Same numbers, very different budgets.

    python3 demos/03_block_vs_naive_benchmark.py [--canvas 64] [--repeats 3]
"""

import argparse
import tracemalloc

import numpy as np

from attnseg.cli import run_benchmark
from attnseg.fusion import refine_block


def peak_bytes(r: int, canvas: int, seed: int = 0) -> int:
    rng = np.random.default_rng(seed)
    raw = rng.random((r, r, r, r)) + 1e-3
    maps = {r: raw / raw.sum(axis=(2, 3), keepdims=True)}
    fused = rng.random((canvas, canvas))
    tracemalloc.start()
    refine_block(maps, fused, {r: 1.0})
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    return peak


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--canvas", type=int, default=64)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    resolutions = tuple(r for r in (8, 16, 32) if r <= args.canvas)
    rows = run_benchmark(args.canvas, resolutions, repeats=args.repeats, seed=5)
    dense = args.canvas**2 * args.canvas**2 * 8

    print(f"canvas {args.canvas}, dense affinity would be {dense / 1e6:.0f} MB")
    print(f"{'r':>4s} {'naive (s)':>10s} {'block (s)':>10s} {'speedup':>8s} {'max diff':>10s} {'block peak':>11s}")
    for row in rows:
        peak = peak_bytes(row.resolution, args.canvas)
        print(
            f"{row.resolution:4d} {row.naive_seconds:10.4f} {row.block_seconds:10.4f} "
            f"{row.naive_seconds / row.block_seconds:7.0f}x {row.max_abs_diff:10.2e} "
            f"{peak / 1e6:9.2f} MB"
        )


if __name__ == "__main__":
    main()
