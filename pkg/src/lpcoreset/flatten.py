"""Constant-factor bicriteria subspaces and row-splitting flattening (p < 2 preprocessing)."""
import math

import numpy as np

from . import _kernels
from .errors import InputError
from .linalg import DenseMatrix, SubspaceQuery, _as_matrix, pq_norm, residual_cost, zero_cost_rtol
from .scores import lewis_weights


def sparse_embedding(d, t, s, seed):
    """t x d sparse sign matrix: each column has exactly s nonzeros of value +-1/sqrt(s)."""
    if not 1 <= s <= t:
        raise InputError(f"sparsity must satisfy 1 <= s <= t, got s={s}, t={t}")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5E]))
    G = np.zeros((t, d))
    val = 1.0 / math.sqrt(s)
    for j in range(d):
        pos = rng.choice(t, size=s, replace=False)
        G[pos, j] = val * rng.choice((-1.0, 1.0), size=s)
    return DenseMatrix(G)


def bicriteria_subspace(M, p, k, delta, seed, sketch_dim=None, sparsity=None,
                        n_samples=None, max_rank=None):
    """Span of rows sampled by the l_p Lewis weights of A G^T for a sparse embedding G.

    Parameters
    ----------
    M : DenseMatrix
    p : float
        Must lie in [1, 2].
    k : int
        Target rank of the underlying problem.
    delta : float
        Failure probability; enters the default sizes.
    seed : int
    sketch_dim, sparsity, n_samples : int, optional
        Override t = ceil(k ln(n/delta)), s = ceil(ln(n/delta)) and the number
        of draws 4 t ln(t/delta).
    max_rank : int, optional
        If the sampled span is larger, keep only its top right singular
        directions of the l_p-rescaled sample.

    Returns
    -------
    SubspaceQuery
        Orthonormal basis. ``meta`` records the cost of the subspace, the
        number of distinct sampled rows and the sketch sizes.
    """
    M = _as_matrix(M)
    if not 1 <= p <= 2:
        raise InputError(f"bicriteria solver needs 1 <= p <= 2, got {p}")
    if k < 1:
        raise InputError("k must be >= 1")
    n, d = M.n, M.d
    log_term = math.log(max(n, 2) / delta)
    t = sketch_dim or max(1, int(math.ceil(k * log_term)))
    s = min(t, sparsity or max(1, int(math.ceil(log_term))))
    draws = n_samples or max(k, int(math.ceil(4 * t * math.log(max(t, 2) / delta))))

    X = M.effective()
    G = sparse_embedding(d, t, s, seed).data
    w = lewis_weights(X @ G.T, p).values
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xB1]))
    total = w.sum()
    if total <= 0:
        V = np.eye(d)[:, :1]
        return SubspaceQuery(V, tag="bicriteria", meta={"cost": pq_norm(M, p), "rows": 0})
    probs = w / total
    picked = np.unique(rng.choice(n, size=draws, replace=True, p=probs))
    # l_p rescaling of the sample only matters when its span is truncated
    rows = X[picked] * (1.0 / np.maximum(draws * probs[picked], 1e-300) ** (1.0 / p))[:, None]
    _, S, Vt = np.linalg.svd(rows, full_matrices=False)
    r = int(np.sum(S > 1e-12 * S[0])) if S.size and S[0] > 0 else 0
    cap = min(n, d) if max_rank is None else min(max_rank, n, d)
    r = max(1, min(r, cap))
    V = Vt[:r].T
    cost = residual_cost(M, SubspaceQuery(V), p)
    return SubspaceQuery(V, tag="bicriteria", meta={
        "cost": cost, "rows": int(picked.size), "sketch_dim": t,
        "sparsity": s, "draws": draws, "rank": r})


def flatten(M, F, p):
    """Split rows whose residual cost against F is heavy into equal scaled copies.

    A row with residual cost c_i >= (2/n) T, where T is the total residual
    cost, becomes l_i = ceil(c_i n / (2 T)) copies of a_i / l_i^{1/p}. Every
    query's cost is unchanged and every row of the result has residual cost at
    most (2/n) T.
    """
    M = _as_matrix(M)
    res = _kernels.residual_row_norms(M.data, F.basis) * M.row_weights
    cost = res ** p
    total = float(cost.sum())
    if total <= 1e-300 or total <= zero_cost_rtol(p) * pq_norm(M, p):
        return M
    n = M.n
    thresh = 2.0 * total / n
    copies = np.ones(n, dtype=np.int64)
    heavy = cost >= thresh
    copies[heavy] = np.ceil(cost[heavy] / thresh).astype(np.int64)
    if not np.any(copies > 1):
        return M
    pos = np.repeat(np.arange(n), copies)
    w = M.row_weights[pos] / copies[pos].astype(np.float64) ** (1.0 / p)
    origin = M.origin[pos]
    # number copies of each original row 0, 1, 2, ... so per-row coins stay distinct
    order = np.argsort(origin, kind="stable")
    sorted_org = origin[order]
    starts = np.r_[0, np.flatnonzero(np.diff(sorted_org)) + 1]
    run_start = np.repeat(starts, np.diff(np.r_[starts, sorted_org.size]))
    copy_id = np.empty_like(origin)
    copy_id[order] = np.arange(sorted_org.size) - run_start
    return DenseMatrix(M.data[pos], w, origin, copy_id)
