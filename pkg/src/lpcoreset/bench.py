"""Timing harnesses: numba vs numpy kernels, and construction over a synthetic suite."""
import time

import numpy as np

from . import _kernels
from .linalg import DenseMatrix
from .pipeline import build_strong_coreset
from .sampling import SamplerConfig
from .synth import low_rank_plus_noise
from .verify import distortion, query_suite


def _best_of(fn, repeats):
    fn()  # warm-up; also triggers compilation
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _kernel_cases(n, d, k, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    V, _ = np.linalg.qr(rng.standard_normal((d, k)))
    w = rng.uniform(0.5, 2.0, n)
    keys = np.arange(n, dtype=np.uint64)
    q = rng.uniform(0.05, 1.0, n)
    dirs = rng.standard_normal((256, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    X3 = X[:, :3].copy()
    sq3 = np.einsum("ij,ij->i", X3, X3)
    seeds = np.arange(64, dtype=np.uint64)
    return {
        "hash_uniforms": (7, 1, keys, np.zeros(n, np.uint64)),
        "weighted_row_norms": (X, w),
        "residual_row_norms": (X, V),
        "sphere_grid": (sq3, X3, 1.0, dirs),
        "sampled_mass": (w, q, seeds, 0),
    }


def kernel_benchmark(n=20000, d=30, k=3, repeats=5, seed=0):
    """Best-of-``repeats`` seconds per kernel for every available backend."""
    cases = _kernel_cases(n, d, k, seed)
    records = []
    for name, args in cases.items():
        rec = {"kernel": name, "n": n, "d": d}
        for backend, impls in _kernels.IMPLEMENTATIONS.items():
            rec[backend] = _best_of(lambda: impls[name](*args), repeats)
        if "numba" in rec:
            rec["speedup"] = rec["numpy"] / rec["numba"]
        records.append(rec)
    return records


DEFAULT_SUITE = {"n": 2000, "d": 30, "rank": 3, "k": 3, "noise": 0.3, "heavy_tail": False,
                 "ps": (1.0, 1.5, 3.0), "epss": (0.5,), "seeds": (0, 1, 2), "queries": 200}
QUICK_SUITE = dict(DEFAULT_SUITE, n=600, d=10, seeds=(0,), queries=40)


def construction_benchmark(suite=None):
    """One record per (p, eps, seed): coreset size, measured distortion and build time."""
    s = dict(DEFAULT_SUITE if suite is None else suite)
    records = []
    for p in s["ps"]:
        for eps in s["epss"]:
            for seed in s["seeds"]:
                A = low_rank_plus_noise(s["n"], s["d"], s["rank"], s["noise"], s["heavy_tail"], seed)
                cfg = SamplerConfig.practical(p, s["k"], eps, seed=seed)
                t0 = time.perf_counter()
                c = build_strong_coreset(DenseMatrix(A), cfg)
                build = time.perf_counter() - t0
                rep = distortion(A, c, query_suite(A, s["k"], s["queries"], seed, coreset=c, p=p), p, eps)
                records.append({"p": p, "eps": eps, "seed": seed, "n": s["n"], "d": s["d"],
                                "rank": s["rank"], "noise": s["noise"], "heavy_tail": s["heavy_tail"],
                                "size": c.size, "rounds": c.meta.get("rounds", 0),
                                "max_deviation": rep.max_deviation, "passed": rep.passed,
                                "build_seconds": build, "backend": _kernels.BACKEND})
    return records
