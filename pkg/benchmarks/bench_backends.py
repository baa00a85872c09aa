"""Throughput comparison of the compiled and pure-Python Gillespie kernels.

Runs the same trajectory workload (identical seeds, hence identical event
sequences) through both backends and reports events per second.

Usage: python3 benchmarks/bench_backends.py [--t 200] [--rho 0.5] [--trials 20]
"""

import argparse
import time

from ahrkit.core import ModelParams, rounded_scaled_experiment
from ahrkit.simulate import (
    SimConfig,
    _run_kernel_once,
    backend_name,
    empirical_crossing_counts,
    sample_step_bernoulli_initial,
    trajectory_rng,
)

try:
    from ahrkit import _gillespie  # noqa: F401
    HAVE_COMPILED = True
except ImportError:
    HAVE_COMPILED = False

import numpy as np


def bench(backend: str, params: ModelParams, n: int, m: int, t: float,
          trials: int, seed: int) -> tuple[float, int]:
    cks = np.zeros(0, dtype=np.float64)
    events = 0
    start = time.perf_counter()
    for i in range(trials):
        rng = trajectory_rng(seed, i)
        c0 = sample_step_bernoulli_initial(params, n, m, rng)
        res = _run_kernel_once(c0, params, t, cks, rng,
                               record_configs=False, stop_when_crossed=True,
                               backend=backend)
        events += res.events
    return time.perf_counter() - start, events


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--t", type=float, default=200.0)
    ap.add_argument("--rho", type=float, default=0.5)
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    params = ModelParams(alpha=args.alpha, beta=1 - args.alpha, rho=args.rho)
    # thresholds at the macroscopic currents so trajectories run the full
    # horizon with the frozen-particle sweep doing realistic work
    n, m, _ = rounded_scaled_experiment(args.t, 0.0, 0.0, args.rho)
    print(f"workload: n={n} m={m} t={args.t} rho={args.rho} "
          f"trials={args.trials} (default backend: {backend_name()})")

    backends = ["python"] + (["compiled"] if HAVE_COMPILED else [])
    results = {}
    for b in backends:
        # python backend gets a slice of the work or it would dominate runtime
        trials = args.trials if b == "compiled" else max(1, args.trials // 10)
        dt, events = bench(b, params, n, m, args.t, trials, args.seed)
        results[b] = (dt, events, trials)
        print(f"{b:>9}: {events / dt / 1e6:8.2f} M events/s   "
              f"{1e3 * dt / trials:8.2f} ms/trajectory   "
              f"({events} events, {trials} trajectories)")
    if len(results) == 2:
        (dt_p, ev_p, _), (dt_c, ev_c, _) = results["python"], results["compiled"]
        print(f"speedup: {(ev_c / dt_c) / (ev_p / dt_p):.0f}x")

    # cheap correctness cross-check on a small system
    sim = SimConfig(params=params, n=2, m=2, t_max=4.0, trials=200, seed=1)
    ref = empirical_crossing_counts(sim, backend="python")
    for b in backends[1:]:
        got = empirical_crossing_counts(sim, backend=b)
        same = all(np.array_equal(r, g) for r, g in zip(ref, got))
        print(f"parity python vs {b}: {'OK' if same else 'MISMATCH'}")


if __name__ == "__main__":
    main()
