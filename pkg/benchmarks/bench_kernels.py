"""Benchmark the compiled evaluation core against the NumPy fallback.

The workload mirrors the hot path of a real prediction: one hour's density
grid evaluated over a full four-week event window.  Run from the repo root:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --events 15000 --queries 10000
"""

import argparse
import time

import numpy as np

from stkde import kernels


def make_workload(n_events, n_queries, seed=0):
    rng = np.random.default_rng(seed)
    px = rng.uniform(0, 30, n_events)
    py = rng.uniform(0, 20, n_events)
    w = rng.uniform(0, 2, n_events)
    span = int(np.sqrt(n_queries))
    gx, gy = np.meshgrid(np.linspace(0, 30, span), np.linspace(0, 20, span))
    return px, py, w, gx.ravel(), gy.ravel()


def time_backend(impl, workload, kind, repeats):
    px, py, w, qx, qy = workload
    a, b, c = 1.0 / 1.6, 0.0, 1.0 / 1.6  # h ~ 1.26 km on both axes
    best = np.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = impl.weighted_kernel_sum(px, py, w, qx, qy, kind, a, b, c, 0.1)
        best = min(best, time.perf_counter() - t0)
    return best, out


def run(n_events, n_queries, repeats):
    backends = kernels.available_backends()
    workload = make_workload(n_events, n_queries)
    print(f"workload: {n_events} events x {len(workload[3])} query points, "
          f"best of {repeats}")
    print(f"active backend at import: {kernels.BACKEND}")
    print()
    print(f"{'kernel':<14}{'backend':<10}{'seconds':>10}{'pairs/s':>14}{'speedup':>9}")
    rows = []
    for kind, kname in ((kernels.KERNEL_GAUSSIAN, "gaussian"),
                        (kernels.KERNEL_EPANECHNIKOV, "epanechnikov")):
        results = {}
        baseline = None
        for name in ("numpy", "compiled"):
            if name not in backends:
                continue
            secs, out = time_backend(backends[name], workload, kind, repeats)
            results[name] = (secs, out)
            if name == "numpy":
                baseline = secs
        for name, (secs, out) in results.items():
            pairs = n_events * len(workload[3]) / secs
            speedup = baseline / secs if baseline else float("nan")
            print(f"{kname:<14}{name:<10}{secs:>10.3f}{pairs:>14.3g}{speedup:>8.1f}x")
            rows.append((kname, name, secs))
        if len(results) == 2:
            np.testing.assert_allclose(results["numpy"][1], results["compiled"][1],
                                       rtol=1e-12)
            print(f"{'':<14}(outputs agree to 1e-12)")
    if "compiled" not in backends:
        print("\ncompiled extension not built; showing fallback only")
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--events", type=int, default=15_000)
    ap.add_argument("--queries", type=int, default=10_000)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args(argv)
    run(args.events, args.queries, args.repeats)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
