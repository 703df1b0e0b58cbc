import math

import numpy as np
import pytest
from scipy import integrate

from lpcoreset.linalg import DenseMatrix, SubspaceQuery, svd_truncate
from lpcoreset.sampling import SamplerConfig, WeightedCoreset, lp_sample, sampling_probabilities
from lpcoreset.scores import PROBABILITY, ScoreVector, ridge_lambda, ridge_leverage_scores
from lpcoreset.pipeline import build_strong_coreset
from lpcoreset.synth import low_rank_plus_noise
from lpcoreset.verify import (_CostPair, affine_embedding_check, brute_force_opt, distortion, dvoretzky_check,
                              gaussian_collapse_check, gaussian_moment, query_suite)


def identity_coreset(A, p):
    return WeightedCoreset(np.arange(A.shape[0]), np.ones(A.shape[0]), p, rows=A)


def test_query_suite_contract(rng):
    A = rng.standard_normal((80, 7))
    one = query_suite(A, 2, 1, seed=3)
    assert len(one) == 1 and np.array_equal(one[0].basis, query_suite(A, 2, 1, seed=3)[0].basis)
    qs = query_suite(A, 3, 50, seed=1)
    assert len(qs) == 50
    for F in qs:
        assert np.abs(F.basis.T @ F.basis - np.eye(3)).max() <= 1e-10
    tags = [F.tag for F in qs]
    assert tags.count("random") == 30 and tags.count("svd") == 10 and tags.count("rowspan") == 10


def test_adversarial_members_never_worse_than_start():
    A = low_rank_plus_noise(600, 8, 2, seed=1)
    c = build_strong_coreset(DenseMatrix(A), SamplerConfig.practical(1.0, 2, 0.5, target_size=60))
    qs = query_suite(A, 2, 50, seed=2, coreset=c, p=1.0)
    pair = _CostPair(A, c, 1.0)
    base = [pair.deviation(F) for F in qs if F.tag != "adversarial"]
    adv = [F for F in qs if F.tag == "adversarial"]
    assert len(adv) == 10
    for F in adv:
        assert F.meta["deviation"] >= F.meta["start_deviation"]
        assert pair.deviation(F) == pytest.approx(F.meta["deviation"], rel=1e-12)
    assert max(F.meta["deviation"] for F in adv) >= max(base)


def test_identity_coreset_zero_distortion(rng):
    A = rng.standard_normal((60, 5))
    for p in (1.0, 2.5):
        rep = distortion(A, identity_coreset(A, p), query_suite(A, 2, 30, seed=0), p, 0.1)
        assert rep.max_deviation == 0.0 and rep.passed
        assert np.all(rep.ratios == 1.0)


def test_zero_row_may_be_dropped(rng):
    A = rng.standard_normal((30, 4))
    A[7] = 0.0
    keep = np.r_[0:7, 8:30]
    c = WeightedCoreset(keep, np.ones(29), 1.0, rows=A[keep])
    rep = distortion(A, c, query_suite(A, 2, 20, seed=4), 1.0, 0.0)
    np.testing.assert_allclose(rep.ratios, 1.0, rtol=1e-14)


def test_zero_cost_queries_excluded():
    A = np.zeros((10, 3))
    A[:, 0] = np.arange(1, 11)
    F = SubspaceQuery(np.eye(3)[:, :1])
    rep = distortion(A, identity_coreset(A, 1.0), [F], 1.0, 0.1)
    assert rep.excluded == 1 and rep.zero_cost_failures == 0 and np.isnan(rep.ratios[0])
    # a coreset whose rows leave the subspace is flagged
    bad = WeightedCoreset(np.array([0]), np.array([1.0]), 1.0, rows=np.array([[0.0, 1.0, 0.0]]))
    rep = distortion(A, bad, [F], 1.0, 0.1)
    assert rep.zero_cost_failures == 1 and not rep.passed


def test_distortion_scale_invariance(rng):
    A = low_rank_plus_noise(400, 6, 2, seed=2)
    c = build_strong_coreset(DenseMatrix(A), SamplerConfig.practical(1.5, 2, 0.5, target_size=50))
    qs = query_suite(A, 2, 30, seed=1)
    a = distortion(A, c, qs, 1.5).ratios
    c2 = WeightedCoreset(c.indices, c.scales, 1.5, rows=c.rows * 7.5)
    b = distortion(A * 7.5, c2, qs, 1.5).ratios
    np.testing.assert_allclose(a, b, rtol=1e-12)


def test_bernoulli_coreset_unbiased_ratio(rng):
    A = rng.standard_normal((200, 10))
    qs = query_suite(A, 2, 5, seed=1)
    M = DenseMatrix(A)
    ratios = np.array([distortion(A, lp_sample(M, ScoreVector(np.full(200, 0.5), PROBABILITY), 1.0, s), qs,
                                  1.0).ratios for s in range(500)])
    mean, se = ratios.mean(axis=0), ratios.std(axis=0, ddof=1) / math.sqrt(500)
    assert np.all(np.abs(mean - 1) <= 3 * se)


def test_report_json_shape(rng):
    A = rng.standard_normal((40, 4))
    rep = distortion(A, identity_coreset(A, 1.0), query_suite(A, 1, 10, seed=0), 1.0, 0.5)
    d = rep.to_dict()
    assert d["passed"] and d["queries"] == 10 and set(d["max_deviation_by_tag"]) <= {"random", "svd", "rowspan"}


def test_affine_check_identity_and_multiplicative(rng):
    A = rng.standard_normal((100, 4))
    b = rng.standard_normal(100)
    R = np.sum(np.abs(b) ** 1.5) ** (1 / 1.5)
    rep = affine_embedding_check(A, b, identity_coreset(A, 1.5), 1.5, R, 50, seed=0)
    assert rep["max_deviation"] == 0.0 and not rep["multiplicative"]
    rep0 = affine_embedding_check(A, None, identity_coreset(A, 1.5), 1.5, 0.0, 10, seed=0)
    assert rep0["multiplicative"] and rep0["max_deviation"] == 0.0


def test_affine_frontier_shrinks_with_oversampling(rng):
    A = rng.standard_normal((300, 6))
    b = rng.standard_normal(300)
    p = 1.5
    R = np.sum(np.abs(b) ** p) ** (1 / p)
    tau = ridge_leverage_scores(A, ridge_lambda(A, 3)).values
    from lpcoreset.scores import RIDGE
    fronts = []
    for alpha in (0.4, 0.1, 0.025):
        q = sampling_probabilities(ScoreVector(tau, RIDGE), p, 300, alpha)
        devs = [affine_embedding_check(A, b, lp_sample(DenseMatrix(A), q, p, s), p, R, 40, seed=s)["max_deviation"]
                for s in range(30)]
        fronts.append(np.median(devs))
    assert fronts[0] >= fronts[1] >= fronts[2]
    front = affine_embedding_check(A, b, lp_sample(DenseMatrix(A), q, p, 0), p, R, 40, 0)["eps_mult"]
    assert all(x >= y for x, y in zip(front, front[1:]))


def test_gaussian_moments():
    assert gaussian_moment(2.0) == pytest.approx(1.0, rel=1e-14)
    assert gaussian_moment(1.0) == pytest.approx(0.79788, abs=1e-5)
    for p in (1.0, 1.5, 3.0):
        val, _ = integrate.quad(lambda x: abs(x) ** p * math.exp(-x * x / 2) / math.sqrt(2 * math.pi),
                                -np.inf, np.inf)
        assert gaussian_moment(p) == pytest.approx(val, rel=1e-9)


def test_dvoretzky():
    rep = dvoretzky_check(4000, 3, 2.0, 50, seed=1)
    assert rep["c_p"] == pytest.approx(1.0) and rep["max_deviation"] < 0.15
    assert dvoretzky_check(4000, 3, 3.0, 100, seed=2)["max_deviation"] <= 0.2
    with pytest.raises(ValueError):
        dvoretzky_check(2, 3, 1.0, 1, 0)


def test_gaussian_collapse():
    rep = gaussian_collapse_check(np.random.default_rng(1).standard_normal((50, 8)), 1.0, 0.1, 10_000, seed=0)
    assert rep["passed"] and rep["failure_rate"] <= 0.1 + 3 * rep["sigma"]
    assert gaussian_collapse_check(np.zeros((4, 3)), 1.0, 0.1, 100, 0)["failure_rate"] == 0.0
    single = gaussian_collapse_check(np.array([[3.0, 4.0]]), 2.0, 0.2, 5000, 1)
    assert single["passed"]


def test_brute_force_examples(rng):
    assert brute_force_opt(np.eye(2), 1.0, 1) == pytest.approx(1.0, abs=1e-9)
    assert brute_force_opt(np.eye(3), 1.0, 1) == pytest.approx(2.0, abs=1e-9)
    for _ in range(5):
        X = rng.standard_normal((30, 6))
        k = int(rng.integers(1, 5))
        assert brute_force_opt(X, 2.0, k, starts=5) == pytest.approx(svd_truncate(X, k)[1], rel=1e-8)
    assert brute_force_opt(X, 1.0, 6) == 0.0
    cost, V = brute_force_opt(X, 1.0, 2, starts=5, return_subspace=True)
    assert V.shape == (6, 2)


def test_brute_force_grid_beats_irls_baseline(rng):
    X = rng.standard_normal((40, 3)) * [3.0, 1.0, 0.3]
    grid = brute_force_opt(X, 1.0, 1)
    from lpcoreset.verify import _irls
    svd_start = np.linalg.svd(X)[2][:1].T
    irls, _ = _irls(X, 1.0, svd_start, 200, 1e-12)
    assert grid <= irls * (1 + 1e-6)
