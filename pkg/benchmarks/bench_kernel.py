#!/usr/bin/env python3
"""Throughput comparison: compiled kernel vs pure-Python engine.

Usage: python benchmarks/bench_kernel.py [requests]
"""

import sys
import time

from tiersim import kernel, traces
from tiersim.sim import MiB, SimConfig, run_trace


def bench(cfg, ops, addrs, force_python):
    t0 = time.perf_counter()
    rep = run_trace(cfg, ops, addrs, force_python=force_python)
    dt = time.perf_counter() - t0
    return rep, dt


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 500_000
    cfg = SimConfig(fast_capacity=8 * MiB)
    ops, addrs = traces.zipf(n, 64 * MiB, seed=7)

    rep_py, t_py = bench(cfg, ops, addrs, force_python=True)
    print(f"python:   {n / t_py:>12,.0f} req/s  ({t_py:.3f}s)")
    if not kernel.HAVE_COMPILED:
        print("compiled kernel not available in this install")
        return
    rep_c, t_c = bench(cfg, ops, addrs, force_python=False)
    print(f"compiled: {n / t_c:>12,.0f} req/s  ({t_c:.3f}s)")
    print(f"speedup:  {t_py / t_c:.1f}x")
    match = rep_py.determinism_hash == rep_c.determinism_hash
    print(f"reports byte-identical: {match}")
    if not match:
        sys.exit(1)


if __name__ == "__main__":
    main()
