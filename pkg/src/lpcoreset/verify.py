"""Empirical certification of coresets and sanity checks of the underlying bounds.

Nothing here proves a universal statement; every check measures a finite
set of queries or trials and reports what it saw.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import gammaln

from . import _kernels
from .linalg import SubspaceQuery, _as_matrix, gaussian_matrix, pq_norm, residual_cost, thin_svd
from .scores import ridge_lambda, ridge_leverage_scores

ZERO_COST_RTOL = 1e-14


@dataclass
class DistortionReport:
    ratios: np.ndarray
    tags: list
    eps: float
    max_deviation: float
    excluded: int = 0
    zero_cost_failures: int = 0
    true_costs: np.ndarray = field(default=None, repr=False)
    est_costs: np.ndarray = field(default=None, repr=False)

    @property
    def passed(self):
        return self.zero_cost_failures == 0 and self.max_deviation <= self.eps

    def median_deviation(self):
        dev = np.abs(self.ratios[np.isfinite(self.ratios)] - 1.0)
        return float(np.median(dev)) if dev.size else 0.0

    def to_dict(self):
        dev_by_tag = {}
        for tag in sorted(set(self.tags)):
            sel = np.array([t == tag for t in self.tags]) & np.isfinite(self.ratios)
            dev_by_tag[tag] = float(np.max(np.abs(self.ratios[sel] - 1.0))) if sel.any() else 0.0
        return {
            "format": "lpcoreset-report/1",
            "eps": self.eps,
            "max_deviation": self.max_deviation,
            "passed": bool(self.passed),
            "queries": len(self.tags),
            "excluded_zero_cost": self.excluded,
            "zero_cost_failures": self.zero_cost_failures,
            "max_deviation_by_tag": dev_by_tag,
            "ratios": [None if not np.isfinite(r) else float(r) for r in self.ratios],
            "tags": list(self.tags),
        }


class _CostPair:
    """Full and coreset objective for one fixed (matrix, coreset) pair."""

    def __init__(self, M, c, p):
        self.M = _as_matrix(M)
        self.C = c.materialize(self.M) if c.rows is None else c.materialize()
        self.p = p
        self.floor = ZERO_COST_RTOL * pq_norm(self.M, p)

    def costs(self, F):
        return residual_cost(self.M, F, self.p), residual_cost(self.C, F, self.p)

    def deviation(self, F):
        true, est = self.costs(F)
        if true <= self.floor:
            return 0.0
        return abs(est / true - 1.0)


def _orthonormal(X):
    Q, _ = np.linalg.qr(X)
    return Q


def query_suite(M, k, count, seed, coreset=None, p=None, adv_steps=50, adv_restarts=5):
    """A mixed family of rank-k queries.

    Roughly 40% random Gaussian frames, 20% spans of top / bottom right
    singular vectors and rotations between them, 20% spans of random row
    subsets and 20% adversarial. Adversarial members hill-climb |ratio - 1|
    for ``coreset`` starting from the worst non-adversarial members; without
    a coreset those slots are filled with random frames.
    """
    M = _as_matrix(M)
    d = M.d
    if not 1 <= k <= d:
        raise ValueError(f"k must satisfy 1 <= k <= d, got {k}")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x9E]))
    n_svd = int(0.2 * count)
    n_rows = int(0.2 * count)
    n_adv = int(0.2 * count)
    n_rand = count - n_svd - n_rows - n_adv
    queries = []
    for _ in range(n_rand):
        queries.append(SubspaceQuery(_orthonormal(rng.standard_normal((d, k))), tag="random"))

    if n_svd:
        X = M.effective()
        R = np.linalg.qr(X, mode="r") if M.n > d else X
        Vfull = np.linalg.svd(R, full_matrices=True)[2].T
        top, bottom = Vfull[:, :k], Vfull[:, d - k:]
        for j in range(n_svd):
            theta = 0.5 * math.pi * j / max(1, n_svd - 1)
            B = math.cos(theta) * top + math.sin(theta) * bottom
            if np.linalg.matrix_rank(B) < k:
                B = B + 1e-3 * rng.standard_normal(B.shape)
            queries.append(SubspaceQuery(_orthonormal(B), tag="svd"))

    for _ in range(n_rows):
        pick = rng.choice(M.n, size=min(k, M.n), replace=False)
        B = M.data[pick].T
        if B.shape[1] < k or np.linalg.matrix_rank(B) < k:
            B = np.hstack([B, rng.standard_normal((d, k))])[:, :k] if B.shape[1] < k else \
                B + 1e-6 * rng.standard_normal(B.shape)
        queries.append(SubspaceQuery(_orthonormal(B), tag="rowspan"))

    if n_adv and coreset is None:
        for _ in range(n_adv):
            queries.append(SubspaceQuery(_orthonormal(rng.standard_normal((d, k))), tag="random"))
    elif n_adv:
        pair = _CostPair(M, coreset, coreset.p if p is None else p)
        devs = np.array([pair.deviation(F) for F in queries])
        starts = np.argsort(-devs, kind="stable")[:max(1, adv_restarts)]
        for j in range(n_adv):
            s = starts[j % starts.size]
            stream = np.random.default_rng(np.random.SeedSequence([int(seed), 0xAD, j]))
            V, best = _hill_climb(pair, queries[s].basis, devs[s], stream, adv_steps)
            queries.append(SubspaceQuery(V, tag="adversarial", meta={"start_deviation": float(devs[s]),
                                                                    "deviation": float(best)}))
    return queries


def _hill_climb(pair, V, start_dev, rng, steps):
    best = start_dev
    step = 0.2
    for _ in range(steps):
        cand = _orthonormal(V + step * rng.standard_normal(V.shape))
        dev = pair.deviation(SubspaceQuery(cand))
        if dev > best:
            V, best = cand, dev
            step = min(1.0, step * 1.3)
        else:
            step = max(1e-3, step * 0.7)
    return V, best


def distortion(M, c, queries, p, eps=None):
    """Ratios coreset cost / true cost over ``queries``.

    Queries whose true cost is below 1e-14 * ||M||_{p,2}^p are excluded from the
    ratios; for those the coreset cost must be negligible as well, otherwise
    they count as failures.
    """
    pair = _CostPair(M, c, p)
    ratios = np.full(len(queries), np.nan)
    true = np.empty(len(queries))
    est = np.empty(len(queries))
    excluded = failures = 0
    est_floor = ZERO_COST_RTOL * pq_norm(pair.C, p) if pair.C.n else 0.0
    for i, F in enumerate(queries):
        true[i], est[i] = pair.costs(F)
        if true[i] <= pair.floor:
            excluded += 1
            if est[i] > max(est_floor, pair.floor) * 1e3:
                failures += 1
            continue
        ratios[i] = est[i] / true[i]
    fin = np.isfinite(ratios)
    max_dev = float(np.max(np.abs(ratios[fin] - 1.0))) if fin.any() else 0.0
    return DistortionReport(ratios, [F.tag for F in queries], eps if eps is not None else math.nan,
                            max_dev, excluded, failures, true, est)


def affine_embedding_check(M, b, c, p, R, trials, seed, eps_add_grid=(0.0, 0.01, 0.05, 0.1, 0.2, 0.5),
                           n_scales=8):
    """Measure | ||S(Ax+b)||_p^p - ||Ax+b||_p^p | against relative and additive R^p error.

    x ranges over random directions scaled so that ||Ax||_p = 2^i R for
    i = 0 .. n_scales - 1. With b = 0 (or R = 0) the check is purely
    multiplicative. ``frontier[j]`` is the smallest relative error that
    explains every trial once an additive allowance eps_add_grid[j] * R^p is
    granted.
    """
    M = _as_matrix(M)
    A = M.data
    b = np.zeros(M.n) if b is None else np.asarray(b, dtype=np.float64)
    w_full = M.row_weights ** p
    idx, w_core = c.indices, c.scales ** p
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xAF]))
    multiplicative = R <= 0 or not np.any(b)
    full = np.empty(trials)
    dev = np.empty(trials)
    for t in range(trials):
        x = rng.standard_normal(M.d)
        Ax = A @ x
        norm = np.sum(w_full * np.abs(Ax) ** p) ** (1.0 / p)
        if norm > 0:
            target = 1.0 if multiplicative else R * 2.0 ** (t % n_scales)
            x *= target / norm
            Ax *= target / norm
        y = Ax + b
        full[t] = np.sum(w_full * np.abs(y) ** p)
        est = np.sum(w_core * np.abs(y[idx]) ** p)
        dev[t] = abs(est - full[t])
    Rp = 0.0 if multiplicative else R ** p
    live = full > 0
    frontier = []
    for ea in eps_add_grid:
        slack = np.maximum(dev - ea * Rp, 0.0)
        frontier.append(float(np.max(slack[live] / full[live])) if live.any() else 0.0)
    return {"eps_add": list(eps_add_grid), "eps_mult": frontier, "max_deviation": frontier[0],
            "multiplicative": bool(multiplicative), "trials": trials}


def gaussian_moment(p):
    """E|g|^p for g ~ N(0, 1): 2^{p/2} Gamma((p+1)/2) / sqrt(pi)."""
    return math.exp(0.5 * p * math.log(2.0) + gammaln(0.5 * (p + 1.0)) - 0.5 * math.log(math.pi))


def dvoretzky_check(n, k, p, trials, seed):
    if n < k:
        raise ValueError("need n >= k")
    G = gaussian_matrix(n, k, seed).data
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xD7]))
    X = rng.standard_normal((k, trials))
    X /= np.linalg.norm(X, axis=0)
    cp = gaussian_moment(p)
    ratio = np.sum(np.abs(G @ X) ** p, axis=0) / (cp * n)
    return {"c_p": cp, "ratios": ratio, "max_deviation": float(np.max(np.abs(ratio - 1.0)))}


def gaussian_collapse_check(M, p, delta, trials, seed, lower_const=None, upper_const=None):
    """How often lower * delta * ||Xg||_p^p <= ||X||_{p,2}^p <= upper * delta^-p * ||Xg||_p^p holds.

    The default constants are 1/(2 E|g|^p) and 2^p, for which the failure
    rate is at most delta for every X (Markov on the left, Gaussian small-ball
    on the right).
    """
    M = _as_matrix(M)
    X = M.effective()
    lower = 1.0 / (2.0 * gaussian_moment(p)) if lower_const is None else lower_const
    upper = 2.0 ** p if upper_const is None else upper_const
    total = pq_norm(M, p)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x6C]))
    g = rng.standard_normal((M.d, trials))
    v = np.sum(np.abs(X @ g) ** p, axis=0)
    ok = (lower * delta * v <= total) & (total <= upper * delta ** (-p) * v)
    ok |= (total == 0) & (v == 0)
    rate = 1.0 - float(np.mean(ok))
    sigma = math.sqrt(delta * (1.0 - delta) / trials)
    return {"failure_rate": rate, "sigma": sigma, "passed": rate <= delta + 3 * sigma,
            "lower_const": lower, "upper_const": upper}


def _hemisphere_rings(h):
    for theta in np.arange(0.0, 0.5 * math.pi + 0.5 * h, h):
        theta = min(theta, 0.5 * math.pi)
        m = max(1, int(math.ceil(2 * math.pi * math.sin(theta) / h)))
        phi = np.arange(m) * (2 * math.pi / m)
        st = math.sin(theta)
        yield np.column_stack([st * np.cos(phi), st * np.sin(phi), np.full(m, math.cos(theta))])


def _grid_line_opt(X, p, resolution):
    d = X.shape[1]
    sq = np.einsum("ij,ij->i", X, X)
    if d == 2:
        th = np.arange(0.0, math.pi, resolution)
        blocks = [np.column_stack([np.cos(th), np.sin(th)])]
    else:
        blocks = _hemisphere_rings(resolution)
    best, best_dir = np.inf, None
    for D in blocks:
        costs = _kernels.sphere_grid(sq, X, p, D)
        j = int(np.argmin(costs))
        if costs[j] < best:
            best, best_dir = float(costs[j]), D[j].copy()

    def f(v):
        nv = np.linalg.norm(v)
        if nv == 0:
            return np.inf
        return float(_kernels.sphere_grid(sq, X, p, (v / nv)[None, :])[0])

    res = minimize(f, best_dir, method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 2000})
    if res.fun < best:
        best, best_dir = float(res.fun), res.x / np.linalg.norm(res.x)
    return best, best_dir[:, None]


def _irls(X, p, V, max_iter, tol):
    best_cost, best_V = np.inf, V
    k = V.shape[1]
    for _ in range(max_iter):
        r = _kernels.residual_row_norms(X, V)
        cost = float(np.sum(r ** p))
        if cost < best_cost * (1 - tol):
            best_cost, best_V = cost, V
        elif cost >= best_cost:
            break
        else:
            best_cost, best_V = min(cost, best_cost), V
            break
        if p == 2:
            w = np.ones_like(r)
        elif p < 2:
            w = np.maximum(r, 1e-12 * max(r.max(), 1e-300)) ** (p - 2.0)
        else:
            w = r ** (p - 2.0)
        C = (X * w[:, None]).T @ X
        V = np.linalg.eigh(C)[1][:, -k:]
    return best_cost, best_V


def brute_force_opt(M, p, k, starts=50, seed=0, max_iter=100, tol=1e-10, resolution=1e-3,
                    return_subspace=False):
    """Best rank-k l_p subspace cost found by search; an upper bound on OPT.

    k = 1 in at most three dimensions uses a dense grid over the sphere at
    the given angular resolution followed by a Nelder-Mead polish. Otherwise
    IRLS (weights r_i^{p-2}, top-k eigenvectors of the weighted Gram) runs
    from the SVD subspace and ``starts`` random frames, keeping the best.
    """
    M = _as_matrix(M)
    X = M.effective()
    d = M.d
    if k >= d:
        V = np.eye(d)
        return (0.0, V) if return_subspace else 0.0
    if k == 1 and d <= 3:
        best, V = _grid_line_opt(X, p, resolution)
    else:
        _, _, Vs = thin_svd(X, compute_u=False)
        best, V = _irls(X, p, Vs[:, :k], max_iter, tol)
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x0B]))
        for _ in range(starts):
            c, W = _irls(X, p, _orthonormal(rng.standard_normal((d, k))), max_iter, tol)
            if c < best:
                best, V = c, W
    return (best, V) if return_subspace else best


def sensitivity_domination_check(M, k, n_queries, seed):
    """Check tau_i^lambda >= (1/48) ||a_i^T(I-P_F)||^2 / ||A(I-P_F)||_F^2 over random rank-k F.

    Returns the smallest observed tau_i / share ratio; the inequality holds
    on the sample iff it is at least 1/48.
    """
    M = _as_matrix(M)
    lam = ridge_lambda(M, k)
    tau = ridge_leverage_scores(M, lam).values
    X = M.effective()
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x48]))
    worst = np.inf
    for _ in range(n_queries):
        V = _orthonormal(rng.standard_normal((M.d, k)))
        r2 = _kernels.residual_row_norms(X, V) ** 2
        tot = r2.sum()
        if tot <= 0:
            continue
        share = r2 / tot
        live = share > 0
        worst = min(worst, float(np.min(tau[live] / share[live])))
    return {"min_ratio": worst, "holds": bool(worst >= 1.0 / 48.0), "lambda": lam}
