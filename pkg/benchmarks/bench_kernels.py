#!/usr/bin/env python3
"""Time the compiled Cython kernels against their pure-numpy twins.

Both backends implement identical semantics (the test suite holds them to
bit-identical SDE output and matching spectra), so the only question here is
speed.  Run from the repository root after building the extension:

    python3 benchmarks/bench_kernels.py
"""

import argparse
import time

import numpy as np

from irelab._kernels import fallback
from irelab.rng import spawn_stream

try:
    from irelab._kernels import _core as compiled
except ImportError:
    compiled = None

JACOBI_SIZES = (8, 16, 32, 64)
SDE_PATHS = 512
SDE_STEPS = 20_000


def best_of(repeats, fn):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def bench_jacobi(mod, matrices, repeats):
    def work():
        for a in matrices:
            buf = np.array(a, order="C")
            vecs = np.eye(buf.shape[0])
            mod.jacobi_rotate(buf, vecs, 1e-12, 100)

    return best_of(repeats, work)


def bench_sde(mod, dw, repeats):
    def work():
        u = np.full(SDE_PATHS, 1.5)
        v = np.zeros(SDE_PATHS)
        mod.sde_quadratic_chunk(u, v, dw, 1.0, 1.0, 1e-4, 9.0, 5e-4)

    return best_of(repeats, work)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5, help="best-of timing repeats")
    parser.add_argument("--batch", type=int, default=20, help="matrices per Jacobi size")
    args = parser.parse_args()

    if compiled is None:
        print("compiled extension not built; showing the numpy fallback only")

    rng = spawn_stream(2024, 0)
    rows = []
    for p in JACOBI_SIZES:
        mats = []
        for _ in range(args.batch):
            a = rng.standard_normal((p, p))
            mats.append(a + a.T)
        t_np = bench_jacobi(fallback, mats, args.repeats)
        t_c = bench_jacobi(compiled, mats, args.repeats) if compiled else None
        rows.append((f"jacobi_rotate x{args.batch}", f"{p}x{p}", t_np, t_c))

    dw = rng.standard_normal((SDE_STEPS, SDE_PATHS)) * np.sqrt(5e-4)
    t_np = bench_sde(fallback, dw, args.repeats)
    t_c = bench_sde(compiled, dw, args.repeats) if compiled else None
    rows.append(("sde_quadratic_chunk", f"{SDE_PATHS}x{SDE_STEPS}", t_np, t_c))

    print(f"{'kernel':<24}{'size':>12}{'numpy':>12}{'compiled':>12}{'speedup':>10}")
    for name, size, t_np, t_c in rows:
        if t_c is None:
            print(f"{name:<24}{size:>12}{t_np * 1e3:>10.2f}ms{'-':>12}{'-':>10}")
        else:
            print(
                f"{name:<24}{size:>12}{t_np * 1e3:>10.2f}ms{t_c * 1e3:>10.2f}ms"
                f"{t_np / t_c:>9.1f}x"
            )


if __name__ == "__main__":
    main()
