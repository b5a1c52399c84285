#!/usr/bin/env python3
"""Benchmark the stencil kernels: compiled extension vs numpy fallback.

The per-step hot path is the fused Hessian gather + 2x2 eigenvalue sweep
over all active nodes; everything else in a step is boundary-ring sized.
Usage: python benchmarks/bench_kernels.py [--spacing 1/64] [--repeats 200]
"""

import argparse
import time

import numpy as np

from slgflow import _kernels_py
from slgflow.fields import sample_field
from slgflow.geometry import classify_grid, make_ellipse

try:
    from slgflow import _kernels_cy
except ImportError:
    _kernels_cy = None


def parse_spacing(text):
    if "/" in text:
        a, b = text.split("/")
        return float(a) / float(b)
    return float(text)


def bench(impl, args, repeats):
    impl.hessian_eigs(*args)  # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        impl.hessian_eigs(*args)
    return (time.perf_counter() - t0) / repeats


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--spacing", default="1/64")
    ap.add_argument("--repeats", type=int, default=200)
    opts = ap.parse_args()
    h = parse_spacing(opts.spacing)

    grid = classify_grid(make_ellipse((1.0, 1.0)), h)
    field = sample_field(grid, lambda p: p[:, 0] ** 2 + 0.7 * p[:, 1] ** 2
                         + 0.2 * p[:, 0] * p[:, 1])
    args = (field.values.ravel(), grid.xx_i, grid.xx_c, grid.yy_i, grid.yy_c,
            grid.xy_i, grid.xy_c)

    print(f"grid spacing {h:g}: {grid.n_active} active nodes "
          f"({grid.counts['interior']} interior)")
    t_py = bench(_kernels_py, args, opts.repeats)
    print(f"numpy fallback : {t_py * 1e6:9.1f} us/sweep")
    if _kernels_cy is None:
        print("compiled       :   unavailable (build the extension first)")
        return
    t_cy = bench(_kernels_cy, args, opts.repeats)
    out_py = _kernels_py.hessian_eigs(*args)
    out_cy = _kernels_cy.hessian_eigs(*args)
    worst = max(float(np.max(np.abs(a - b))) for a, b in zip(out_py, out_cy))
    print(f"compiled       : {t_cy * 1e6:9.1f} us/sweep "
          f"({t_py / t_cy:.1f}x speedup, max deviation {worst:.1e})")


if __name__ == "__main__":
    main()
