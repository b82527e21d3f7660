#!/usr/bin/env python3
"""Benchmark the RK4 stepping kernels: numba JIT vs pure-numpy fallback.

Runs the matched and unmatched benchmark scenarios over their full horizons
at dt = 1e-3 (100k and 40k steps) on both backends and prints wall times,
steps per second and the speedup.  Usage:

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from consensus_net.graph import build_laplacian
from consensus_net.kernels import HAVE_NUMBA
from consensus_net.dynamics import MatchedLoop, UnmatchedLoop
from consensus_net.scenario import builtin_scenario
from consensus_net.sim import SimParams, integrate


def bench_case(name, loop, z0, params, backend, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        integrate(loop, z0, params, backend=backend)
        best = min(best, time.perf_counter() - t0)
    steps = params.n_steps
    return best, steps / best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=3, help="best-of repetitions")
    args = parser.parse_args()

    cases = []
    for name in ("paper-matched", "paper-unmatched"):
        sc = builtin_scenario(name)
        lap = build_laplacian(sc.graph)
        loop_cls = MatchedLoop if sc.mode == "matched" else UnmatchedLoop
        loop = loop_cls(sc.gains, lap, sc.disturbance)
        z0 = np.concatenate([sc.x0, sc.y0, sc.delta_hat0])
        params = SimParams(t_final=sc.t_final, dt=sc.dt, sample_every=sc.sample_every)
        cases.append((name, loop, z0, params))

    backends = ["numpy"] + (["numba"] if HAVE_NUMBA else [])
    if HAVE_NUMBA:
        # compile outside the timed region
        for name, loop, z0, params in cases:
            integrate(loop, z0, SimParams(t_final=10 * params.dt, dt=params.dt),
                      backend="numba")
    else:
        print("numba not importable; benchmarking the numpy path only")

    print(f"{'scenario':<18} {'backend':<8} {'steps':>8} {'time [s]':>10} {'steps/s':>12}")
    results = {}
    for name, loop, z0, params in cases:
        for backend in backends:
            best, rate = bench_case(name, loop, z0, params, backend, args.repeat)
            results[(name, backend)] = best
            print(f"{name:<18} {backend:<8} {params.n_steps:>8} {best:>10.3f} {rate:>12.0f}")
    if HAVE_NUMBA:
        for name, *_ in cases:
            speedup = results[(name, "numpy")] / results[(name, "numba")]
            print(f"{name}: numba speedup {speedup:.1f}x")


if __name__ == "__main__":
    main()
