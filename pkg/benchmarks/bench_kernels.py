#!/usr/bin/env python3
"""Benchmark: compiled Cython kernels vs the pure-NumPy fallback.

Times the raw log-likelihood kernel over a large n range and a realistic
end-to-end workload (scale estimates over Monte Carlo draws). Run after an
editable install:

    python3 benchmarks/bench_kernels.py

To benchmark the full pipeline under one specific backend, set
BINPOP_KERNEL=python (or =cython) and rerun.
"""

import time

import numpy as np

from binpop import _kernels_py
from binpop.core import BetaPrior, Sample, ScanCache, TruncationPolicy
from binpop.estimators import EstimatorSpec, run_estimator
from binpop.kernels import BACKEND
from binpop.montecarlo import substream

try:
    from binpop import _kernels
except ImportError:
    _kernels = None


def time_it(fn, repeat=5):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernel():
    rng = np.random.default_rng(0)
    counts = rng.binomial(15, 0.0339, size=94)
    sample = Sample(tuple(int(c) for c in counts))
    xs, cnts = sample.histogram
    args = (xs, cnts, sample.k, sample.s, 2.0, 57.0, 1, 500_000)

    rows = []
    if _kernels is not None:
        rows.append(("cython", time_it(lambda: _kernels.logbb_range(*args))))
    rows.append(("numpy", time_it(lambda: _kernels_py.logbb_range(*args))))
    print("logbb_range over 500k n values:")
    base = rows[-1][1]
    for name, t in rows:
        print(f"  {name:8s} {t*1e3:9.1f} ms   ({base - t:+.3f} s vs numpy)")


def bench_estimates():
    beta = BetaPrior(2.0, 2.0 / 0.0339 - 2.0)
    tr = TruncationPolicy(tail_tol=1e-7, n_cap=10**6)
    spec = EstimatorSpec.scale(0.0, beta.a, beta.b, trunc=tr)
    cache = ScanCache(94, beta)

    def work():
        for rep in range(50):
            rng = substream(42, 0, rep)
            s = Sample(tuple(int(c) for c in rng.binomial(15, 0.0339, 94)))
            run_estimator(spec, s, cache=cache)

    work()  # warm the cache so the timing reflects the steady state
    t = time_it(work, repeat=3)
    print(f"50 SE(0) estimates (k=94, cached scans), active backend "
          f"[{BACKEND}]: {t*1e3:.0f} ms")


if __name__ == "__main__":
    print(f"active kernel backend: {BACKEND}")
    bench_kernel()
    bench_estimates()
