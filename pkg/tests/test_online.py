import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lpcoreset.errors import InputError
from lpcoreset.linalg import DenseMatrix
from lpcoreset.online import OnlineState, online_condition_number, online_coreset, online_update, stream_coreset
from lpcoreset.sampling import SamplerConfig
from lpcoreset.scores import ridge_lambda, ridge_leverage_scores
from lpcoreset.synth import low_rank_plus_noise
from lpcoreset.verify import distortion, query_suite


def brute_kappa(A):
    top = np.linalg.svd(A, compute_uv=False)[0]
    worst = 0.0
    for i in range(1, A.shape[0] + 1):
        s = np.linalg.svd(A[:i], compute_uv=False)
        tol = s[0] * max(i, A.shape[1]) * np.finfo(float).eps
        live = s[s > tol]
        if live.size:
            worst = max(worst, 1 / live[-1])
    return top * worst


def test_first_and_zero_rows():
    cfg = SamplerConfig.practical(1.0, 2, 0.5)
    st_ = OnlineState(3, cfg, n_hint=100)
    online_update(st_, np.array([1.0, 2.0, 3.0]))
    assert st_.scores[0] == 1.0 and st_.probs[0] == 1.0
    assert st_.kept.indices.tolist() == [0] and st_.kept.scales.tolist() == [1.0]
    online_update(st_, np.zeros(3))
    assert st_.scores[1] == 0.0
    assert st_.probs[1] == pytest.approx(st_.floor)
    with pytest.raises(InputError):
        online_update(st_, np.ones(4))
    with pytest.raises(InputError):
        online_update(st_, np.array([np.inf, 0, 0]))
    with pytest.raises(InputError):
        OnlineState(3, cfg, n_hint=0)


def test_row_outside_span_gets_full_score():
    cfg = SamplerConfig.practical(3.0, 1, 0.5)
    st_ = online_coreset(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]), cfg)
    assert st_.scores == [1.0, 1.0, 1.0]


def test_domination_of_offline_scores():
    A = np.random.default_rng(0).standard_normal((500, 10))
    cfg = SamplerConfig.practical(1.0, 3, 0.5)
    st_ = online_coreset(A, cfg)
    tau = ridge_leverage_scores(A, ridge_lambda(A, 3)).values
    assert np.all(np.array(st_.scores) >= tau - 1e-12)
    assert sum(st_.scores) >= tau.sum()


def test_decisions_are_irrevocable():
    A = low_rank_plus_noise(400, 6, 2, seed=1)
    cfg = SamplerConfig.practical(1.5, 2, 0.5)
    st_ = OnlineState(6, cfg, n_hint=400)
    history = []
    for row in A:
        online_update(st_, row)
        kept = st_.kept.indices.tolist()
        assert kept[:len(history)] == history
        history = kept
    assert all(a < b for a, b in zip(history, history[1:]))
    assert np.all(np.linalg.eigvalsh(st_.gram_sketch) >= -1e-9 * np.trace(st_.gram_sketch))
    assert st_.lambda_est >= 0


def test_kappa_examples(rng):
    assert online_condition_number(np.eye(6)) == pytest.approx(1.0)
    assert online_condition_number(np.diag([1.0, 1e-3])) == pytest.approx(1e3, rel=1e-12)
    A = rng.standard_normal((50, 5))
    assert online_condition_number(A) == pytest.approx(brute_kappa(A), rel=1e-9)
    st_ = online_coreset(A, SamplerConfig.practical(3.0, 2, 0.5))
    assert st_.kappa() == pytest.approx(brute_kappa(A), rel=1e-9)
    assert online_condition_number(np.zeros((3, 2))) == 1.0


@given(st.integers(0, 2**31))
def test_kappa_properties(seed):
    r = np.random.default_rng(seed)
    n, d = int(r.integers(2, 12)), int(r.integers(1, 5))
    A = r.standard_normal((n, d))
    kap = online_condition_number(A)
    assert kap >= 1 - 1e-12
    assert online_condition_number(3.7 * A) == pytest.approx(kap, rel=1e-9)
    # a duplicate of an existing row never makes any prefix worse conditioned
    B = np.vstack([A, A[int(r.integers(0, n))]])
    top_a = np.linalg.svd(A, compute_uv=False)[0]
    top_b = np.linalg.svd(B, compute_uv=False)[0]
    assert online_condition_number(B) / top_b <= kap / top_a * (1 + 1e-9)


def test_duplicate_can_raise_kappa():
    # the norm factor grows while no prefix gets worse, so kappa itself can rise
    A = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert online_condition_number(A) == pytest.approx(1.0)
    assert online_condition_number(np.vstack([A, [1.0, 0.0]])) == pytest.approx(math.sqrt(2))


def test_stream_shorter_than_buffer_is_online():
    A = low_rank_plus_noise(300, 5, 2, seed=2)
    cfg = SamplerConfig.practical(1.0, 2, 0.5)
    on = online_coreset(A, cfg).kept
    c = stream_coreset(A, cfg, buffer_size=10_000)
    assert np.array_equal(on.indices, c.indices) and np.array_equal(on.scales, c.scales)
    assert c.meta["reductions"] == 0


def test_stream_replay_and_iterables():
    A = low_rank_plus_noise(1500, 8, 2, seed=3)
    cfg = SamplerConfig.practical(3.0, 2, 0.5, seed=5)
    a = stream_coreset(A, cfg, buffer_size=150)
    b = stream_coreset(iter(list(A)), cfg, n_hint=1500, buffer_size=150)
    assert a.meta["reductions"] > 0
    assert np.array_equal(a.indices, b.indices) and np.array_equal(a.scales, b.scales)
    assert np.all(a.indices < 1500)
    with pytest.raises(InputError):
        stream_coreset(iter([]), cfg, n_hint=5)
    with pytest.raises(InputError):
        stream_coreset(A, cfg, level_eps="x")


def test_stream_distortion_and_size():
    A = low_rank_plus_noise(5000, 30, 3, seed=0)
    cfg = SamplerConfig.practical(1.0, 3, 0.5, seed=0)
    c = stream_coreset(A, cfg)
    off = __import__("lpcoreset").build_strong_coreset(DenseMatrix(A), cfg)
    rep = distortion(A, c, query_suite(A, 3, 200, seed=1, coreset=c, p=1.0), 1.0, 0.5)
    assert rep.max_deviation <= 0.5
    assert c.size <= 10 * off.size
    flat = stream_coreset(A, cfg, level_eps="flat")
    assert flat.size < c.size
