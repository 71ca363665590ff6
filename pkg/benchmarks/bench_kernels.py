"""Time the compiled kernels against the numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py [--paths N]``.  Both backends
get identical inputs; the script also reports the largest difference in the
outputs so a speedup never hides a disagreement.
"""

from __future__ import annotations

import argparse
import time
from dataclasses import replace

import numpy as np

from lifeins import predetermined as pre
from lifeins.feedback import optimal_predetermined
from lifeins.kernels import backends
from lifeins.model import ModelParams, SimConfig, bridge_uniforms, derive_constants, normal_blocks


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_policy(paths: int, repeat: int) -> None:
    dc = derive_constants(ModelParams())
    prm = optimal_predetermined(dc, pre.solve(dc)).param_vector(dc)
    sim = SimConfig(n_paths=paths, dt=1 / 12, horizon_T=538.8, seed=1, dt_max=4.0, stretch=0.03)
    t = sim.time_grid()
    n_steps = len(t) - 1
    eps = np.ascontiguousarray(next(normal_blocks(replace(sim, n_paths=min(paths, 4096)), n_steps))[1])
    eps = np.ascontiguousarray(np.resize(eps, (paths, n_steps)))
    unif = np.resize(bridge_uniforms(sim, 0, min(paths, 4096), n_steps), (paths, n_steps))
    w0 = 1.0 + 1.0 / dc.kappa
    results = {}
    for name, mod in backends().items():
        vals = np.empty(paths)

        def call():
            mod.simulate_policy(eps, t, w0, 1.0, prm, vals, np.empty(paths), np.empty(paths, dtype=np.int_),
                                np.empty(0), np.empty((0, 0)), unif)

        results[name] = (best_of(call, repeat), vals.copy())
    report("simulate_policy", paths, results)


def bench_counts(paths: int, steps: int, repeat: int) -> None:
    rng = np.random.default_rng(2)
    rows = np.sort(rng.standard_normal((steps, paths)), axis=1)
    thresholds = rng.standard_normal(steps)
    results = {}
    for name, mod in backends().items():
        out = np.empty(steps, dtype=np.int_)
        mod.column_counts(rows, thresholds, out)
        results[name] = (best_of(lambda: mod.column_counts(rows, thresholds, out), repeat), out.astype(float))
    report("column_counts", paths, results)


def bench_sums(paths: int, steps: int, repeat: int) -> None:
    rng = np.random.default_rng(3)
    bm = np.cumsum(rng.standard_normal((paths, steps)) * 0.1, axis=1)
    drift_p = np.linspace(0, -1, steps)
    drift_q = np.linspace(0, 1, steps)
    log_b = np.full(steps, -0.5)
    w_const = rng.random(steps)
    w_lin = rng.random(steps)
    results = {}
    for name, mod in backends().items():
        out = np.empty(paths)
        mod.gompertz_sums(bm, drift_p, drift_q, log_b, w_const, w_lin, 0.0, out)
        results[name] = (best_of(lambda: mod.gompertz_sums(bm, drift_p, drift_q, log_b, w_const, w_lin, 0.0, out),
                                 repeat), out.copy())
    report("gompertz_sums", paths, results)


def report(kernel: str, paths: int, results: dict) -> None:
    base_t, base_v = results["python"]
    for name, (t, v) in results.items():
        diff = float(np.max(np.abs(v - base_v)))
        print(f"{kernel:<16} {name:<7} paths {paths:>7}  {t * 1e3:10.2f} ms  "
              f"speedup {base_t / t:6.1f}x  max diff {diff:.3g}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=8192)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if "cython" not in backends():
        print("compiled extension not built; only the numpy fallback is available")
    bench_policy(args.paths, args.repeat)
    bench_counts(args.paths, 600, args.repeat)
    bench_sums(args.paths, 600, args.repeat)


if __name__ == "__main__":
    main()
