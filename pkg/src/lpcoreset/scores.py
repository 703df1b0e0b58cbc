"""Per-row importance scores: leverage, ridge leverage and l_p Lewis weights."""
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import ConvergenceError, InputError
from .linalg import _as_matrix, numerical_rank, singular_values, tail_energy, thin_svd

LEVERAGE = "leverage"
RIDGE = "ridge"
LEWIS = "lewis"
PROBABILITY = "probability"
ONLINE = "online"


@dataclass(frozen=True)
class ScoreVector:
    """Scores aligned with matrix rows.

    ``param`` holds the ridge parameter for ``kind == "ridge"`` and p for
    ``kind == "lewis"``; it is None otherwise.
    """

    values: np.ndarray
    kind: str
    param: float = None

    @property
    def n(self):
        return self.values.shape[0]

    def sum(self):
        return float(np.sum(self.values))


def _row_space_factor(X):
    """n x r matrix with orthonormal columns spanning the column space of X."""
    U, S, _ = thin_svd(X)
    r = numerical_rank(S)
    return U[:, :r], S[:r]


def leverage_scores(M):
    M = _as_matrix(M)
    U, _ = _row_space_factor(M.effective())
    tau = np.einsum("ij,ij->i", U, U)
    return ScoreVector(np.clip(tau, 0.0, 1.0), LEVERAGE)


def ridge_lambda(M, k):
    """Regularization ||A - A_k||_F^2 / k that makes ridge scores sum to at most 2k."""
    M = _as_matrix(M)
    if not 1 <= k <= min(M.n, M.d):
        raise InputError(f"k must satisfy 1 <= k <= min(n, d) = {min(M.n, M.d)}, got {k}")
    return tail_energy(singular_values(M), k) / k


def ridge_leverage_scores(M, lam, sketch_rows=None, seed=0):
    """tau_i = a_i^T (A^T A + lam I)^{-1} a_i for every row of the effective matrix.

    With ``sketch_rows`` set, the Gram matrix is formed from a Gaussian sketch
    of A with that many rows instead of A itself.
    """
    M = _as_matrix(M)
    if lam < 0:
        raise InputError(f"ridge parameter must be nonnegative, got {lam}")
    if lam == 0:
        return leverage_scores(M)
    X = M.effective()
    if sketch_rows is not None:
        rng = np.random.default_rng(seed)
        Y = rng.standard_normal((sketch_rows, X.shape[0])) @ X / np.sqrt(sketch_rows)
        gram = Y.T @ Y
    else:
        gram = X.T @ X
    gram[np.diag_indices_from(gram)] += lam
    try:
        L = np.linalg.cholesky(gram)
        Z = sla.solve_triangular(L, X.T, lower=True, check_finite=False)
        tau = np.einsum("ij,ij->j", Z, Z)
    except np.linalg.LinAlgError:
        evals, evecs = np.linalg.eigh(gram)
        P = X @ evecs
        tau = np.sum(P * P / np.maximum(evals, lam), axis=1)
    return ScoreVector(np.clip(tau, 0.0, 1.0), RIDGE, float(lam))


def lewis_weights(M, p, tol=1e-10, max_iter=500):
    """l_p Lewis weights via the fixed-point iteration w <- (a_i^T (A^T W^{1-2/p} A)^{-1} a_i)^{p/2}.

    The iteration is a contraction for p < 4. Rank-deficient inputs are first
    reduced to an orthonormal basis of their column space, which leaves the
    weights unchanged. If successive updates stop contracting, the remaining
    iterations use the damped geometric-mean update.
    """
    M = _as_matrix(M)
    if not 1 <= p < 4:
        raise InputError(f"Lewis weights need 1 <= p < 4, got {p}")
    X, _ = _row_space_factor(M.effective())
    n, r = X.shape
    if r == 0:
        return ScoreVector(np.zeros(n), LEWIS, float(p))
    live = np.einsum("ij,ij->i", X, X) > 1e-28
    w = np.where(live, r / max(1, int(live.sum())), 0.0)
    expo = 0.5 - 1.0 / p
    damped = False
    prev_change = np.inf
    rising = 0
    for _ in range(max_iter):
        scale = np.zeros(n)
        scale[live] = w[live] ** expo
        B = X * scale[:, None]
        G = B.T @ B
        try:
            L = np.linalg.cholesky(G)
            Z = sla.solve_triangular(L, X.T, lower=True, check_finite=False)
            lev = np.einsum("ij,ij->j", Z, Z)
        except np.linalg.LinAlgError:
            lev = np.einsum("ij,ij->i", X @ np.linalg.pinv(G), X)
        update = np.where(live, np.maximum(lev, 0.0) ** (p / 2.0), 0.0)
        if damped:
            update = np.sqrt(w * update)
        change = float(np.max(np.abs(update - w)))
        w = update
        if change <= tol:
            return ScoreVector(w, LEWIS, float(p))
        rising = rising + 1 if change > prev_change else 0
        if rising >= 3:
            damped = True
        prev_change = change
    raise ConvergenceError(f"Lewis weights did not converge in {max_iter} iterations",
                           last_iterate=ScoreVector(w, LEWIS, float(p)))
