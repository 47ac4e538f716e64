"""Benchmark the pure-numpy kernels against the compiled extension.

Times the fused logistic pass and the SGD/SAGA inner loops on dense and CSR
storage, printing per-call medians and the compiled-over-pure speedup.

    python3 benchmarks/bench_kernels.py [--n 100000] [--p 200] [--repeats 7]
"""

import argparse
import statistics
import time

import numpy as np
import scipy.sparse as sp

from ktan import kernels
from ktan.errors import CapabilityError


def _median_time(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def _build_inputs(n, p, seed):
    rng = np.random.default_rng(seed)
    feats = rng.standard_normal((n, p))
    sparse_feats = feats.copy()
    sparse_feats[rng.random((n, p)) < 0.9] = 0.0
    csr = sp.csr_matrix(sparse_feats)
    labels = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    margins = rng.standard_normal(n) * 3.0
    draws = rng.integers(0, n, size=n, dtype=np.int64)
    return feats, csr, labels, margins, draws


def _cases(feats, csr, labels, margins, draws, step, reg):
    n, p = feats.shape
    data, cols, indptr = csr.data, csr.indices, csr.indptr

    def logistic(mod):
        mod.logistic_stats(margins)

    def sgd_dense(mod):
        mod.sgd_dense(feats, labels, np.zeros(p), draws, step, reg)

    def saga_dense(mod):
        mod.saga_dense(
            feats, labels, np.zeros(p), np.zeros(n), np.zeros(p),
            draws, step, reg,
        )

    def sgd_csr(mod):
        mod.sgd_csr(data, cols, indptr, labels, np.zeros(p), draws, step, reg)

    def saga_csr(mod):
        mod.saga_csr(
            data, cols, indptr, labels, np.zeros(p), np.zeros(n),
            np.zeros(p), draws, step, reg,
        )

    return [
        (f"logistic_stats n={n}", logistic),
        (f"sgd_dense {n}x{p}", sgd_dense),
        (f"saga_dense {n}x{p}", saga_dense),
        (f"sgd_csr {n}x{p}", sgd_csr),
        (f"saga_csr {n}x{p}", saga_csr),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=100_000, help="sample count")
    ap.add_argument("--p", type=int, default=200, help="feature dimension")
    ap.add_argument("--repeats", type=int, default=7, help="timing repeats")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    pure = kernels.get_backend("pure")
    try:
        compiled = kernels.get_backend("compiled")
    except CapabilityError:
        compiled = None
        print("compiled extension not available; timing the pure backend only")

    feats, csr, labels, margins, draws = _build_inputs(args.n, args.p, args.seed)
    step = 1e-3
    reg = 1e-2

    width = 24
    header = f"{'case':<{width}} {'pure':>10} {'compiled':>10} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name, fn in _cases(feats, csr, labels, margins, draws, step, reg):
        t_pure = _median_time(lambda: fn(pure), args.repeats)
        if compiled is None:
            print(f"{name:<{width}} {t_pure * 1e3:9.2f}ms {'-':>10} {'-':>9}")
            continue
        t_comp = _median_time(lambda: fn(compiled), args.repeats)
        ratio = t_pure / t_comp if t_comp > 0 else float("inf")
        print(
            f"{name:<{width}} {t_pure * 1e3:9.2f}ms {t_comp * 1e3:9.2f}ms "
            f"{ratio:8.1f}x"
        )


if __name__ == "__main__":
    main()
