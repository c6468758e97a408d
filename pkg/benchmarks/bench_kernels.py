#!/usr/bin/env python3
"""Time the compiled kernels against the NumPy fallback.

Runs each hot kernel on representative workloads (the separable blur taps
and Scharr window used by the edge-response stage, and a full CLAHE remap),
verifies both backends agree bit for bit, then reports per-call wall time
and the speedup. Usage:

    python3 benchmarks/bench_kernels.py [--size 512] [--repeats 20]
"""

import argparse
import time

import numpy as np

from shapeseg.kernels import fallback
from shapeseg.preprocess import ClaheParams, _axis_lut, _axis_tiles, _tile_maps

try:
    from shapeseg.kernels import _core
except ImportError:
    _core = None


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _workloads(size):
    rng = np.random.default_rng(0)
    img_f = rng.random((size, size))
    img_u8 = rng.integers(0, 256, (size, size), dtype=np.uint8)
    taps = rng.random(25)  # the sigma=4 blur radius used by the edge stage
    scharr = np.array([[-3.0, 0.0, 3.0], [-10.0, 0.0, 10.0], [-3.0, 0.0, 3.0]])

    params = ClaheParams()
    row_starts, row_sizes = _axis_tiles(size, params.grid_rows)
    col_starts, col_sizes = _axis_tiles(size, params.grid_cols)
    maps = _tile_maps(img_u8, params)
    rlo, rhi, rw = _axis_lut(row_starts, row_sizes, size)
    clo, chi, cw = _axis_lut(col_starts, col_sizes, size)
    clahe_args = (img_u8, maps, rlo, rhi, rw, clo, chi, cw)

    return [
        ("correlate1d 25-tap", lambda m: m.correlate1d_replicate(img_f, taps, 1)),
        ("correlate2d scharr", lambda m: m.correlate2d_replicate(img_f, scharr)),
        ("clahe_apply 8x8", lambda m: m.clahe_apply(*clahe_args)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--size", type=int, default=512, help="square image edge length")
    ap.add_argument("--repeats", type=int, default=20, help="timing repeats (best is kept)")
    args = ap.parse_args()

    if _core is None:
        raise SystemExit("compiled extension not built; run: python3 setup.py build_ext --inplace")

    print(f"image {args.size}x{args.size}, best of {args.repeats} runs")
    print(f"{'kernel':<22} {'compiled':>12} {'fallback':>12} {'speedup':>9}")
    for name, call in _workloads(args.size):
        a = np.asarray(call(_core))
        b = np.asarray(call(fallback))
        if not np.array_equal(a, b):
            raise SystemExit(f"{name}: backends disagree — benchmark aborted")
        tc = _time(lambda: call(_core), args.repeats)
        tf = _time(lambda: call(fallback), args.repeats)
        print(f"{name:<22} {tc * 1e3:>10.2f}ms {tf * 1e3:>10.2f}ms {tf / tc:>8.1f}x")


if __name__ == "__main__":
    main()
