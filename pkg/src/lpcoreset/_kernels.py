"""Hot inner loops, compiled with numba when available.

Every kernel exists twice: a numba ``@njit`` version and a pure-numpy
version with the same signature and the same results (bit-identical for the
integer hashing, identical up to summation order for the float reductions).
The numba path is used unless numba cannot be imported or the environment
variable ``LPCORESET_DISABLE_NUMBA`` is set to a truthy value.
"""
import os

import numpy as np

_MASK_TRUE = {"1", "true", "yes", "on"}
_FORCE_NUMPY = os.environ.get("LPCORESET_DISABLE_NUMBA", "").strip().lower() in _MASK_TRUE

try:
    import numba
    from numba import njit, prange

    if "NUMBA_THREADING_LAYER" not in os.environ:
        numba.config.THREADING_LAYER = "omp"

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

BACKEND = "numba" if HAS_NUMBA and not _FORCE_NUMPY else "numpy"

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------

def _mix_np(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def hash_uniforms_numpy(seed, round_index, keys, copies):
    """Uniform(0,1) draws keyed by (seed, round, key, copy); splitmix64 chain."""
    keys = np.asarray(keys, dtype=np.uint64)
    copies = np.asarray(copies, dtype=np.uint64)
    with np.errstate(over="ignore"):
        h = _mix_np(np.uint64(seed) + _GOLDEN)
        h = _mix_np((h ^ np.uint64(round_index)) + _GOLDEN)
        h = _mix_np((h ^ keys) + _GOLDEN)
        h = _mix_np((h ^ copies) + _GOLDEN)
    return ((h >> _S11).astype(np.float64) + 0.5) * _INV53


def weighted_row_norms_numpy(X, w):
    return w * np.sqrt(np.einsum("ij,ij->i", X, X))


def residual_row_norms_numpy(X, V):
    R = X - (X @ V) @ V.T
    return np.sqrt(np.einsum("ij,ij->i", R, R))


def sphere_grid_numpy(sq_norms, X, p, dirs):
    """Cost of every candidate unit direction (rows of ``dirs``) as a k=1 query."""
    out = np.empty(dirs.shape[0])
    chunk = max(1, 2_000_000 // max(1, X.shape[0]))
    for start in range(0, dirs.shape[0], chunk):
        D = dirs[start:start + chunk]
        proj = X @ D.T
        res = np.maximum(sq_norms[:, None] - proj * proj, 0.0)
        out[start:start + chunk] = np.sum(res ** (p / 2.0), axis=0)
    return out


def sampled_mass_numpy(mass, q, seeds, round_index):
    """For each seed, sum of mass_i / q_i over the rows kept by the hashed sampler."""
    n = mass.shape[0]
    keys = np.arange(n, dtype=np.uint64)
    zeros = np.zeros(n, dtype=np.uint64)
    contrib = mass / q
    out = np.empty(len(seeds))
    for j, s in enumerate(seeds):
        u = hash_uniforms_numpy(int(s), round_index, keys, zeros)
        out[j] = np.sum(np.where(u < q, contrib, 0.0))
    return out


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if HAS_NUMBA:

    @njit(cache=True, inline="always")
    def _mix_nb(z):
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
        return z ^ (z >> _S31)

    @njit(cache=True)
    def _hash_one(seed, round_index, key, copy):
        h = _mix_nb(seed + _GOLDEN)
        h = _mix_nb((h ^ round_index) + _GOLDEN)
        h = _mix_nb((h ^ key) + _GOLDEN)
        h = _mix_nb((h ^ copy) + _GOLDEN)
        return (np.float64(h >> _S11) + 0.5) * _INV53

    @njit(cache=True)
    def _hash_uniforms_nb(seed, round_index, keys, copies):
        out = np.empty(keys.shape[0])
        for i in range(keys.shape[0]):
            out[i] = _hash_one(seed, round_index, keys[i], copies[i])
        return out

    def hash_uniforms_numba(seed, round_index, keys, copies):
        keys = np.ascontiguousarray(keys, dtype=np.uint64)
        copies = np.ascontiguousarray(copies, dtype=np.uint64)
        return _hash_uniforms_nb(np.uint64(seed), np.uint64(round_index), keys, copies)

    @njit(cache=True, parallel=True)
    def _weighted_row_norms_nb(X, w):
        n, d = X.shape
        out = np.empty(n)
        for i in prange(n):
            acc = 0.0
            for j in range(d):
                acc += X[i, j] * X[i, j]
            out[i] = w[i] * np.sqrt(acc)
        return out

    def weighted_row_norms_numba(X, w):
        return _weighted_row_norms_nb(np.ascontiguousarray(X, dtype=np.float64),
                                      np.ascontiguousarray(w, dtype=np.float64))

    @njit(cache=True, parallel=True)
    def _residual_row_norms_nb(X, V, C):
        n, d = X.shape
        k = V.shape[1]
        out = np.empty(n)
        for i in prange(n):
            acc = 0.0
            for j in range(d):
                r = X[i, j]
                for t in range(k):
                    r -= V[j, t] * C[i, t]
                acc += r * r
            out[i] = np.sqrt(acc)
        return out

    def residual_row_norms_numba(X, V):
        X = np.ascontiguousarray(X, dtype=np.float64)
        V = np.ascontiguousarray(V, dtype=np.float64)
        # projection coefficients through BLAS; the kernel fuses subtract + norm
        return _residual_row_norms_nb(X, V, X @ V)

    @njit(cache=True, parallel=True)
    def _sphere_grid_nb(sq_norms, X, p, dirs):
        m = dirs.shape[0]
        n, d = X.shape
        half_p = p / 2.0
        out = np.empty(m)
        for a in prange(m):
            total = 0.0
            for i in range(n):
                dot = 0.0
                for j in range(d):
                    dot += X[i, j] * dirs[a, j]
                r = sq_norms[i] - dot * dot
                if r > 0.0:
                    # scalar pow is the bottleneck; p = 1 and p = 2 have cheap forms
                    if half_p == 0.5:
                        total += np.sqrt(r)
                    elif half_p == 1.0:
                        total += r
                    else:
                        total += r ** half_p
            out[a] = total
        return out

    def sphere_grid_numba(sq_norms, X, p, dirs):
        return _sphere_grid_nb(np.ascontiguousarray(sq_norms, dtype=np.float64),
                               np.ascontiguousarray(X, dtype=np.float64), float(p),
                               np.ascontiguousarray(dirs, dtype=np.float64))

    @njit(cache=True)
    def _sampled_mass_nb(mass, q, seeds, round_index):
        n = mass.shape[0]
        out = np.empty(seeds.shape[0])
        zero = np.uint64(0)
        for s in range(seeds.shape[0]):
            total = 0.0
            for i in range(n):
                if _hash_one(seeds[s], round_index, np.uint64(i), zero) < q[i]:
                    total += mass[i] / q[i]
            out[s] = total
        return out

    def sampled_mass_numba(mass, q, seeds, round_index):
        return _sampled_mass_nb(np.ascontiguousarray(mass, dtype=np.float64),
                                np.ascontiguousarray(q, dtype=np.float64),
                                np.ascontiguousarray(seeds, dtype=np.uint64),
                                np.uint64(round_index))


IMPLEMENTATIONS = {"numpy": {
    "hash_uniforms": hash_uniforms_numpy,
    "weighted_row_norms": weighted_row_norms_numpy,
    "residual_row_norms": residual_row_norms_numpy,
    "sphere_grid": sphere_grid_numpy,
    "sampled_mass": sampled_mass_numpy,
}}
if HAS_NUMBA:
    IMPLEMENTATIONS["numba"] = {
        "hash_uniforms": hash_uniforms_numba,
        "weighted_row_norms": weighted_row_norms_numba,
        "residual_row_norms": residual_row_norms_numba,
        "sphere_grid": sphere_grid_numba,
        "sampled_mass": sampled_mass_numba,
    }

_active = IMPLEMENTATIONS[BACKEND]
hash_uniforms = _active["hash_uniforms"]
weighted_row_norms = _active["weighted_row_norms"]
residual_row_norms = _active["residual_row_norms"]
sphere_grid = _active["sphere_grid"]
sampled_mass = _active["sampled_mass"]


def set_threads(count):
    """Cap worker threads for numba kernels and BLAS. Results do not depend on it."""
    if count is None or count < 1:
        return
    if HAS_NUMBA:
        numba.set_num_threads(min(count, numba.config.NUMBA_NUM_THREADS))
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return
    threadpool_limits(count)
