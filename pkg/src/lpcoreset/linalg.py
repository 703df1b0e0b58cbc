"""Dense linear algebra primitives shared by every other module.

Matrices are carried as :class:`DenseMatrix`, which couples the raw rows with
per-row multiplicative weights and the index of the original dataset row each
row came from. The *effective* matrix that all norms and decompositions see
is ``diag(row_weights) @ data``.
"""
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import InputError

RANK_RTOL = 1e-12
_UNIT_ROUNDOFF = np.finfo(np.float64).eps / 2


def zero_cost_rtol(p):
    """Relative size below which an objective value is roundoff: rows lying in a
    subspace still leave residuals of order u * ||a||, which the p-th power sums."""
    return max(1e-18, (500.0 * _UNIT_ROUNDOFF) ** p)


@dataclass(frozen=True)
class DenseMatrix:
    """Row-major real matrix with row weights and row provenance.

    ``copy_id`` distinguishes several scaled copies of the same original row
    produced by flattening; it is used only to key per-row randomness.
    """

    data: np.ndarray
    row_weights: np.ndarray = None
    origin: np.ndarray = None
    copy_id: np.ndarray = None

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64, order="C")
        if data.ndim == 1:
            data = data.reshape(1, -1)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise InputError(f"matrix must be 2-D with n, d >= 1, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise InputError("matrix contains non-finite entries")
        n = data.shape[0]
        w = np.ones(n) if self.row_weights is None else np.array(self.row_weights, dtype=np.float64)
        if w.shape != (n,):
            raise InputError("row_weights length does not match row count")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise InputError("row_weights must be finite and strictly positive")
        org = np.arange(n, dtype=np.int64) if self.origin is None else np.array(self.origin, dtype=np.int64)
        if org.shape != (n,) or np.any(org < 0):
            raise InputError("origin must hold one nonnegative index per row")
        cid = np.zeros(n, dtype=np.int64) if self.copy_id is None else np.array(self.copy_id, dtype=np.int64)
        if cid.shape != (n,):
            raise InputError("copy_id length does not match row count")
        for arr in (data, w, org, cid):
            arr.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "row_weights", w)
        object.__setattr__(self, "origin", org)
        object.__setattr__(self, "copy_id", cid)

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def d(self):
        return self.data.shape[1]

    def effective(self):
        """The weighted matrix diag(w) @ data."""
        return self.data * self.row_weights[:, None]

    def take(self, rows, extra_scale=None):
        """Sub-matrix of the given row positions; weights optionally multiplied."""
        rows = np.asarray(rows, dtype=np.int64)
        w = self.row_weights[rows]
        if extra_scale is not None:
            w = w * extra_scale
        return DenseMatrix(self.data[rows], w, self.origin[rows], self.copy_id[rows])

    def check_origin(self, n_original):
        if self.origin.size and self.origin.max() >= n_original:
            raise InputError("origin index outside the original dataset")


@dataclass(frozen=True)
class SubspaceQuery:
    """Rank-k subspace of R^d given by a column-orthonormal d x k basis."""

    basis: np.ndarray
    tag: str = field(default="", compare=False)
    meta: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        V = np.array(self.basis, dtype=np.float64)
        if V.ndim == 1:
            V = V.reshape(-1, 1)
        d, k = V.shape
        if not 1 <= k <= d:
            raise InputError(f"subspace rank must satisfy 1 <= k <= d, got k={k}, d={d}")
        err = np.max(np.abs(V.T @ V - np.eye(k)))
        if err > 1e-10:
            raise InputError(f"basis is not orthonormal (max error {err:.2e})")
        V.setflags(write=False)
        object.__setattr__(self, "basis", V)

    @property
    def k(self):
        return self.basis.shape[1]

    @property
    def d(self):
        return self.basis.shape[0]

    @classmethod
    def from_span(cls, vectors, tag=""):
        """Orthonormalize the columns of ``vectors`` (d x m) into a query, dropping null directions."""
        Q, s, _ = np.linalg.svd(np.asarray(vectors, dtype=np.float64), full_matrices=False)
        keep = s > RANK_RTOL * max(s[0], np.finfo(float).tiny) if s.size else s.astype(bool)
        return cls(Q[:, keep], tag=tag)


@dataclass(frozen=True)
class SvdResult:
    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    @property
    def r(self):
        return self.S.shape[0]


def _as_matrix(M):
    return M if isinstance(M, DenseMatrix) else DenseMatrix(M)


def pq_norm(M, p):
    """p-th power of the (p,2)-norm: sum over rows of (w_i * ||row_i||_2)^p."""
    M = _as_matrix(M)
    if not p >= 1:
        raise InputError(f"p must be >= 1, got {p}")
    norms = _kernels.weighted_row_norms(M.data, M.row_weights)
    return float(np.sum(norms ** p))


def residual(M, F):
    """M (I - V V^T): the component of every row orthogonal to F. Weights and origin are kept."""
    M = _as_matrix(M)
    V = F.basis
    if V.shape[0] != M.d:
        raise InputError(f"query dimension {V.shape[0]} does not match matrix dimension {M.d}")
    R = M.data - (M.data @ V) @ V.T
    return DenseMatrix(R, M.row_weights, M.origin, M.copy_id)


def residual_cost(M, F, p):
    """Objective value sum_i (w_i ||a_i^T (I - P_F)||_2)^p without materializing the residual."""
    M = _as_matrix(M)
    if F.basis.shape[0] != M.d:
        raise InputError(f"query dimension {F.basis.shape[0]} does not match matrix dimension {M.d}")
    norms = _kernels.residual_row_norms(M.data, F.basis) * M.row_weights
    return float(np.sum(norms ** p))


def thin_svd(X, compute_u=True):
    """Thin SVD of a dense array. Tall inputs go through a QR factor first (O(n d^2))."""
    n, d = X.shape
    if n >= 4 * d:
        if compute_u:
            Q, R = np.linalg.qr(X)
            Ur, S, Vt = np.linalg.svd(R)
            return Q @ Ur, S, Vt.T
        R = np.linalg.qr(X, mode="r")
        S, Vt = np.linalg.svd(R)[1:]
        return None, S, Vt.T
    U, S, Vt = np.linalg.svd(X, full_matrices=False)
    return (U if compute_u else None), S, Vt.T


def numerical_rank(S):
    if S.size == 0 or S[0] <= 0:
        return 0
    return int(np.sum(S > RANK_RTOL * S[0]))


def _cut(S):
    if S.size == 0 or S[0] <= 0:
        return np.zeros_like(S)
    return np.where(S > RANK_RTOL * S[0], S, 0.0)


def svd_truncate(M, k):
    """Rank-k truncated SVD of the effective matrix and the tail energy ||A - A_k||_F^2.

    Returns
    -------
    svd : SvdResult
        Leading k singular triplets (singular values below the rank cutoff are zeroed).
    tail_energy : float
        Sum of squared singular values beyond the k-th.
    """
    M = _as_matrix(M)
    if not 1 <= k <= min(M.n, M.d):
        raise InputError(f"k must satisfy 1 <= k <= min(n, d) = {min(M.n, M.d)}, got {k}")
    U, S, V = thin_svd(M.effective())
    S = _cut(S)
    tail = float(np.sum(S[k:] ** 2))
    return SvdResult(U[:, :k].copy(), S[:k].copy(), V[:, :k].copy()), tail


def singular_values(M):
    X = M.effective() if isinstance(M, DenseMatrix) else np.asarray(M, dtype=np.float64)
    return thin_svd(X, compute_u=False)[1]


def tail_energy(S, k):
    """Sum of squared singular values beyond index k, with the rank cutoff applied."""
    return float(np.sum(_cut(S)[k:] ** 2))


def gaussian_matrix(rows, cols, seed):
    """rows x cols matrix of i.i.d. standard normals, deterministic in ``seed``."""
    if rows < 1 or cols < 1:
        raise InputError("rows and cols must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    return DenseMatrix(rng.standard_normal((rows, cols)))


def random_orthonormal(d, k, rng):
    Q, _ = np.linalg.qr(rng.standard_normal((d, k)))
    return Q
