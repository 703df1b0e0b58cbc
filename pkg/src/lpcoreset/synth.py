"""Synthetic low-rank + noise datasets for tests and benchmarks."""
import numpy as np


def low_rank_plus_noise(n, d, rank, noise=0.3, heavy_tail=False, seed=0, spectrum=None):
    """n x d matrix G diag(spectrum) V^T + noise * E with a planted rank-``rank`` row space.

    With ``heavy_tail`` each row is multiplied by an independent Pareto(1.5)
    magnitude, which produces a few rows that dominate the l_p objective.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xDA7A]))
    if spectrum is None:
        spectrum = np.geomspace(10.0, 3.0, rank) if rank > 1 else np.array([10.0])
    V, _ = np.linalg.qr(rng.standard_normal((d, rank)))
    coeff = rng.standard_normal((n, rank)) * np.asarray(spectrum, dtype=np.float64)
    A = coeff @ V.T + noise * rng.standard_normal((n, d))
    if heavy_tail:
        A *= (1.0 + rng.pareto(1.5, size=n))[:, None]
    return A


def exact_low_rank(n, d, rank, seed=0):
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x10C]))
    return rng.standard_normal((n, rank)) @ rng.standard_normal((rank, d))
