"""Row-arrival online coresets, the online condition number and merge-and-reduce streaming."""
import math

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, qr as scipy_qr, svdvals

from . import _kernels
from .errors import InputError
from .linalg import _as_matrix
from .pipeline import merge, reduce
from .sampling import WeightedCoreset, derive_seed, sampling_probabilities
from .scores import ONLINE, ScoreVector

# round index used for the online coins, far from any offline round number
ONLINE_ROUND = 0x4F4E4C


class PrefixConditionTracker:
    """Smallest nonzero singular value over all prefixes, via an updated R factor."""

    def __init__(self, d):
        self.R = np.zeros((0, d))
        self.worst_inv = 0.0

    def push(self, row):
        if not np.any(row):
            return
        self.R = scipy_qr(np.vstack([self.R, row]), mode="r")[0][:self.R.shape[1]]
        s = svdvals(self.R)
        tol = s[0] * max(self.R.shape) * np.finfo(float).eps
        live = s[s > tol]
        if live.size:
            self.worst_inv = max(self.worst_inv, 1.0 / live[-1])

    @property
    def log_worst_inv(self):
        return math.log(self.worst_inv) if self.worst_inv > 0 else -math.inf


class OnlineState:
    """Mutable single-owner state of an online coreset.

    ``gram_sketch`` is the exact Gram matrix of the rows seen so far, and
    ``lambda_est`` the ridge parameter computed from its spectrum at the last
    refresh. Decisions are appended and never revisited.
    """

    def __init__(self, d, cfg, n_hint, dataset_id=""):
        if n_hint is None or n_hint < 1:
            raise InputError("online sampling needs a positive stream length hint")
        self.d = int(d)
        self.cfg = cfg
        self.n_hint = int(n_hint)
        self.dataset_id = dataset_id
        self.gram_sketch = np.zeros((d, d))
        self.lambda_est = 0.0
        self.i = 0
        self.scores = []
        self.probs = []
        self._idx, self._scales, self._rows = [], [], []
        self._tracker = PrefixConditionTracker(d)
        self._last_refresh = 0
        self._trace_at_refresh = 0.0
        self._factor = None
        self.seed = derive_seed(cfg.seed, 0x0411)
        rounds = cfg.rounds_for(self.n_hint)
        self.alpha = cfg.alpha(self.n_hint, cfg.round_eps(self.n_hint))
        self.floor = 0.0
        if cfg.p < 2:
            c = cfg.online_floor_c if cfg.online_floor_c is not None else cfg.k / self.alpha
            self.floor = min(1.0, c / self.n_hint)
        self.meta = {"mode": "online", "n_hint": self.n_hint, "alpha": self.alpha,
                     "prob_floor": self.floor, "rounds_in_alpha": rounds}

    @property
    def kappa_log(self):
        top = np.linalg.eigvalsh(self.gram_sketch)[-1] if self.i else 0.0
        if top <= 0 or self._tracker.worst_inv <= 0:
            return 0.0
        return 0.5 * math.log(top) + self._tracker.log_worst_inv

    def kappa(self):
        """Online condition number of the rows seen so far."""
        return math.exp(self.kappa_log)

    @property
    def kept(self):
        rows = np.array(self._rows).reshape(-1, self.d)
        meta = dict(self.meta, rows_seen=self.i, score_sum=float(np.sum(self.scores)),
                    kappa_ol=self.kappa(), per_round_sizes=[len(self._idx)], rounds=1,
                    lambda_per_round=[self.lambda_est])
        return WeightedCoreset(np.array(self._idx, dtype=np.int64), np.array(self._scales), self.cfg.p,
                               self.dataset_id, rows, meta=meta)

    def score(self, row):
        """min(1, row^T (G + lambda I)^- row) from rows strictly before this one."""
        if not np.any(row):
            return 0.0
        if self.i == 0 or not np.any(self.gram_sketch):
            return 1.0
        if self.lambda_est > 0:
            if self._factor is None:
                try:
                    self._factor = cho_factor(self.gram_sketch + self.lambda_est * np.eye(self.d))
                except LinAlgError:
                    self._factor = False
            if self._factor is not False:
                return min(1.0, float(row @ cho_solve(self._factor, row)))
        ev, V = np.linalg.eigh(self.gram_sketch + self.lambda_est * np.eye(self.d))
        live = ev > ev[-1] * self.d * np.finfo(float).eps
        c = V[:, live].T @ row
        outside = row - V[:, live] @ c
        if np.linalg.norm(outside) > 1e-10 * np.linalg.norm(row):
            return 1.0
        return min(1.0, float(np.sum(c ** 2 / ev[live])))

    def _absorb(self, row):
        self.gram_sketch += np.outer(row, row)
        self._factor = None
        self.i += 1
        self._tracker.push(row)
        trace = float(np.trace(self.gram_sketch))
        if self.i - self._last_refresh >= self.d or trace >= 2.0 * self._trace_at_refresh:
            ev = np.linalg.eigvalsh(self.gram_sketch)[::-1]
            k = self.cfg.k
            self.lambda_est = max(0.0, float(np.sum(ev[k:]))) / k
            self._last_refresh = self.i
            self._trace_at_refresh = trace


def online_update(state, row, cfg=None):
    """Score, decide and absorb one arriving row. Mutates and returns ``state``."""
    cfg = state.cfg if cfg is None else cfg
    row = np.asarray(row, dtype=np.float64).ravel()
    if row.shape[0] != state.d:
        raise InputError(f"row has length {row.shape[0]}, expected {state.d}")
    if not np.all(np.isfinite(row)):
        raise InputError(f"row {state.i} contains non-finite values")
    tau = state.score(row)
    q = sampling_probabilities(ScoreVector(np.array([tau]), ONLINE), cfg.p, state.n_hint, state.alpha).values[0]
    q = max(q, state.floor)
    u = _kernels.hash_uniforms(state.seed, ONLINE_ROUND, np.array([state.i], dtype=np.uint64),
                               np.zeros(1, dtype=np.uint64))[0]
    if u < q:
        state._idx.append(state.i)
        state._scales.append(1.0 if q >= 1.0 else q ** (-1.0 / cfg.p))
        state._rows.append(row.copy())
    state.scores.append(tau)
    state.probs.append(q)
    state._absorb(row)
    return state


def online_coreset(rows, cfg, n_hint=None, dataset_id=""):
    """Run online_update over ``rows``; returns the final state."""
    if n_hint is None:
        n_hint = len(rows)
    state = None
    for row in rows:
        if state is None:
            state = OnlineState(np.asarray(row).size, cfg, n_hint, dataset_id)
        online_update(state, row)
    if state is None:
        raise InputError("empty row stream")
    return state


def online_condition_number(M):
    """||A||_2 times the largest prefix pseudo-inverse norm, prefixes taken in row order."""
    M = _as_matrix(M)
    X = M.effective()
    top = svdvals(X)[0] if X.size else 0.0
    if top == 0:
        return 1.0
    tracker = PrefixConditionTracker(M.d)
    for row in X:
        tracker.push(row)
    return float(top * tracker.worst_inv)


def stream_coreset(rows, cfg, n_hint=None, buffer_size=None, dataset_id="", level_eps="log",
                   return_state=False):
    """Online sampling followed by a binary merge-and-reduce tree.

    Rows kept online fill a buffer of ``buffer_size`` rows (default twice the
    target size). Full buffers become leaves; two equal-level nodes merge and
    reduce at accuracy eps / ceil(log2 L), L the expected number of leaves
    (``level_eps="log"``), or at eps itself (``level_eps="flat"``).
    Coin streams are salted by (level, node) so no randomness is reused.
    """
    if n_hint is None:
        n_hint = len(rows)
    B = int(buffer_size or 2 * cfg.target_size)
    leaves = max(2, int(math.ceil(n_hint / B)))
    if level_eps not in ("log", "flat"):
        raise InputError(f"unknown level accuracy schedule {level_eps!r}")
    eps_level = cfg.eps / int(math.ceil(math.log2(leaves))) if level_eps == "log" else cfg.eps
    levels = {}
    counter = [0]
    stats = {"reductions": 0, "leaves": 0}

    def reduce_node(c, level):
        counter[0] += 1
        stats["reductions"] += 1
        return reduce(c, cfg, eps=eps_level, salt=(level, counter[0]))

    def push(c, level=0):
        while level in levels:
            c = reduce_node(merge(levels.pop(level), c), level + 1)
            level += 1
        levels[level] = c

    state = None
    flushed = 0
    for row in rows:
        if state is None:
            state = OnlineState(np.asarray(row).size, cfg, n_hint, dataset_id)
        online_update(state, row)
        if len(state._idx) - flushed >= B:
            push(_slice_kept(state, flushed, len(state._idx)))
            stats["leaves"] += 1
            flushed = len(state._idx)
    if state is None:
        raise InputError("empty row stream")

    if not levels:
        out = state.kept
    else:
        out = _slice_kept(state, flushed, len(state._idx))
        for level in sorted(levels):
            out = merge(levels[level], out)
        if out.size > B:
            out = reduce_node(out, max(levels) + 1)
    out.meta = dict(out.meta, mode="stream", rows_seen=state.i, online_kept=len(state._idx),
                    buffer_size=B, eps_level=eps_level, kappa_ol=state.kappa(), **stats)
    return (out, state) if return_state else out


def _slice_kept(state, lo, hi):
    rows = np.array(state._rows[lo:hi]).reshape(-1, state.d)
    return WeightedCoreset(np.array(state._idx[lo:hi], dtype=np.int64), np.array(state._scales[lo:hi]),
                           state.cfg.p, state.dataset_id, rows, meta={"mode": "online-block"})
