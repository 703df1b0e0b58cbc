"""Offline strong-coreset construction and the merge / reduce operators."""
import logging
import math

import numpy as np

from .errors import ConstructionError, DegenerateRound, InputError
from .flatten import bicriteria_subspace, flatten
from .linalg import _as_matrix
from .sampling import WeightedCoreset, derive_seed, one_round, with_eps

log = logging.getLogger(__name__)

EMPTY_ROUND_RETRIES = 3


def _k_effective(M, cfg, F):
    if cfg.p >= 2:
        return cfg.k
    if cfg.k_prime == "bicriteria" and F is not None:
        return max(cfg.k, F.k)
    return min(M.n, M.d, int(math.ceil(cfg.k * math.log(M.n / cfg.delta))))


def build_strong_coreset(M, cfg, dataset_id="", salt=None):
    """Recursive root ridge leverage score sampling down to ``cfg.target_size`` rows.

    For p < 2 the input is first flattened against a bicriteria subspace. Each
    round samples the current (reweighted) matrix; scales compose through the
    row weights, so the result always refers to original rows. ``salt``
    derives an independent seed, used when the same data is rebuilt (reduce).
    """
    M = _as_matrix(M)
    seed = cfg.seed if salt is None else derive_seed(cfg.seed, *np.atleast_1d(salt))
    meta = {"mode": "offline", "rounds": 0, "per_round_sizes": [], "lambda_per_round": [],
            "alpha_per_round": [], "n_in": M.n, "target_size": cfg.target_size}
    if M.n <= cfg.target_size:
        return WeightedCoreset.from_matrix(M, cfg.p, dataset_id, meta)

    F = None
    cur = M
    if cfg.p < 2:
        F = bicriteria_subspace(M, cfg.p, cfg.k, cfg.delta, derive_seed(seed, 0xF1A7),
                                max_rank=cfg.bicriteria_rank)
        cur = flatten(M, F, cfg.p)
        meta.update(flattened_n=cur.n, bicriteria_rank=F.k, bicriteria_cost=F.meta["cost"])
    k_eff = _k_effective(cur, cfg, F)
    meta["k_eff"] = int(k_eff)
    n0 = M.n
    max_rounds = cfg.rounds_for(n0)
    round_eps = cfg.round_eps(n0)

    for r in range(max_rounds):
        if cur.n <= cfg.target_size:
            break
        for attempt in range(EMPTY_ROUND_RETRIES + 1):
            try:
                frag, nxt = one_round(cur, cfg, k_eff, round_eps, round_index=r,
                                      seed=derive_seed(seed, r, attempt))
            except DegenerateRound:
                log.debug("round %d made no progress on %d rows", r, cur.n)
                nxt = None
                break
            if frag.size:
                break
        else:
            raise ConstructionError(f"round {r} dropped every row after {EMPTY_ROUND_RETRIES} retries")
        if nxt is None:
            break
        cur = nxt
        meta["rounds"] += 1
        meta["per_round_sizes"].append(cur.n)
        meta["lambda_per_round"].append(frag.meta["lam"])
        meta["alpha_per_round"].append(frag.meta["alpha"])
    if cur.n >= M.n:
        # no net progress: flattened copies would only inflate the input
        cur = M
    return WeightedCoreset.from_matrix(cur, cfg.p, dataset_id, meta)


def merge(c1, c2):
    """Union of two coresets of disjoint data; the cost of any query adds."""
    if c1.p != c2.p:
        raise InputError(f"cannot merge coresets with p={c1.p} and p={c2.p}")
    if c1.dataset_id != c2.dataset_id:
        raise InputError("cannot merge coresets of different datasets")
    if c1.size == 0:
        return c2
    if c2.size == 0:
        return c1
    rows = None
    if c1.rows is not None and c2.rows is not None:
        rows = np.vstack([c1.rows, c2.rows])
    meta = {"mode": "merge", "parts": [c1.size, c2.size]}
    return WeightedCoreset(np.r_[c1.indices, c2.indices], np.r_[c1.scales, c2.scales], c1.p,
                           c1.dataset_id, rows, np.r_[c1.copy_ids, c2.copy_ids], meta)


def reduce(c, cfg, eps=None, salt=0, A=None):
    """Re-run the offline construction on a coreset, keeping original-row references.

    ``eps`` overrides the accuracy for this level; the stopping size stays
    ``cfg.target_size``.
    """
    if c.size <= cfg.target_size:
        return c
    level_cfg = cfg if eps is None else with_eps(cfg, eps)
    out = build_strong_coreset(c.materialize(A), level_cfg, c.dataset_id, salt=salt)
    out.meta["mode"] = "reduce"
    return out
