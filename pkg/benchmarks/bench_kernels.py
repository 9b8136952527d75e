"""Compiled versus numpy trajectory kernel.

    python3 benchmarks/bench_kernels.py [--sites 10] [--steps 500] [--batch 64]

Both backends propagate the same noise batch; the script checks that they
agree and reports time per trajectory.
"""
import argparse
import time

import numpy as np

from dissipative_ising import kernels
from dissipative_ising.model import InitialProductState
from dissipative_ising.trajectories import NoisyIsing, run_ensemble


def bench(backend, system, psi, steps, batch, observables, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        ens = run_ensemble(system, psi, steps * 0.01, 0.01, batch, 1, observables, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, ens


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sites", type=int, default=10)
    ap.add_argument("--steps", type=int, default=500)
    ap.add_argument("--batch", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    n = args.sites
    ring = [(j, (j + 1) % n, 1.0) for j in range(n)]
    system = NoisyIsing.uniform(n, ring, 0.25)
    psi = InitialProductState(((0.0, 1.0, 0.0),) * n)
    observables = [{s: a} for s in range(n) for a in "XYZ"]

    results, timing = {}, {}
    for name in sorted(kernels.BACKENDS):
        secs, ens = bench(name, system, psi, args.steps, args.batch, observables, args.repeat)
        results[name], timing[name] = ens, secs
        print(f"{name:>9}: {secs:8.3f} s total, {1e3 * secs / args.batch:8.2f} ms/trajectory")
    if len(results) == 2:
        diff = np.abs(results["python"].mean - results["compiled"].mean).max()
        print(f"max |mean difference| = {diff:.2e}; speedup {timing['python'] / timing['compiled']:.1f}x")
    else:
        print("compiled extension not built; only the numpy backend ran")


if __name__ == "__main__":
    main()
