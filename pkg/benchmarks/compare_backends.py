#!/usr/bin/env python3
"""Time the multiply engine's compiled kernels against the pure-Python
fallback (SPGEMMKIT_NO_NUMBA=1) on synthetic matrices.

Both backends run in fresh subprocesses so process startup and jit
compilation stay outside the timed region; each case reports the best of
--repeats timed multiplies after one warmup.

Usage: python3 benchmarks/compare_backends.py [--repeats 3] [--cases small]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

CASES = {
    "small": [(500, 0.01), (1000, 0.005), (2000, 0.002)],
    "full": [(500, 0.01), (1000, 0.005), (2000, 0.002),
             (4000, 0.002), (8000, 0.001)],
}


def build_matrix(seed: int, n: int, density: float):
    import numpy as np

    from spgemmkit import csr_from_dense

    rng = np.random.default_rng(seed)
    keep = rng.random((n, n)) < density
    vals = rng.uniform(0.5, 2.0, size=keep.shape)
    return csr_from_dense(np.where(keep, vals, 0.0))


def run_case(seed: int, n: int, density: float, repeats: int) -> dict:
    from spgemmkit import spgemm
    from spgemmkit._accel import NUMBA_ENABLED

    a = build_matrix(seed, n, density)
    product, stats = spgemm(a, a)  # warmup (and jit compile, if enabled)
    best = min(spgemm(a, a)[1].seconds_total for _ in range(repeats))
    return {
        "backend": "numba" if NUMBA_ENABLED else "numpy",
        "n": n,
        "nnz": a.nnz,
        "total_ip": stats.total_ip,
        "nnz_out": product.nnz,
        "seconds": best,
    }


def measure(backend: str, seed: int, n: int, density: float, repeats: int) -> dict:
    env = dict(os.environ)
    env.pop("SPGEMMKIT_NO_NUMBA", None)
    if backend == "numpy":
        env["SPGEMMKIT_NO_NUMBA"] = "1"
    argv = [sys.executable, os.path.abspath(__file__), "--worker",
            "--seed", str(seed), "--n", str(n), "--density", str(density),
            "--repeats", str(repeats)]
    out = subprocess.run(argv, env=env, capture_output=True, text=True, check=True)
    result = json.loads(out.stdout)
    assert result["backend"] == backend, f"worker ran {result['backend']}, wanted {backend}"
    return result


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--cases", choices=sorted(CASES), default="small")
    parser.add_argument("--n", type=int, help=argparse.SUPPRESS)
    parser.add_argument("--density", type=float, help=argparse.SUPPRESS)
    parser.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()

    if args.worker:
        print(json.dumps(run_case(args.seed, args.n, args.density, args.repeats)))
        return

    header = f"{'case':>16} {'nnz(A)':>9} {'nnz(A*A)':>10} {'numba':>10} {'numpy':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    t0 = time.perf_counter()
    for n, density in CASES[args.cases]:
        jit = measure("numba", args.seed, n, density, args.repeats)
        interp = measure("numpy", args.seed, n, density, args.repeats)
        assert jit["nnz_out"] == interp["nnz_out"], "backends disagree on the product"
        speedup = interp["seconds"] / jit["seconds"] if jit["seconds"] else float("inf")
        print(f"{f'rand-{n}-{density:g}':>16} {jit['nnz']:>9} {jit['nnz_out']:>10} "
              f"{jit['seconds']:>9.4f}s {interp['seconds']:>9.4f}s {speedup:>7.1f}x")
    print(f"\ntotal wall time {time.perf_counter() - t0:.1f}s "
          f"(best of {args.repeats} per cell, warmup excluded)")


if __name__ == "__main__":
    main()
