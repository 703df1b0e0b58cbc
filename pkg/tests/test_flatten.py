import numpy as np
import pytest
from hypothesis import given, strategies as st

from lpcoreset import _kernels
from lpcoreset.errors import InputError
from lpcoreset.flatten import bicriteria_subspace, flatten, sparse_embedding
from lpcoreset.linalg import DenseMatrix, SubspaceQuery, pq_norm, residual_cost, zero_cost_rtol
from lpcoreset.synth import exact_low_rank, low_rank_plus_noise
from lpcoreset.verify import brute_force_opt
from conftest import orthonormal


def test_sparse_embedding_structure():
    G = sparse_embedding(10, 30, 4, seed=1).data
    assert G.shape == (30, 10)
    assert np.all((G != 0).sum(axis=0) == 4)
    np.testing.assert_allclose(np.abs(G[G != 0]), 0.5)
    assert np.array_equal(G, sparse_embedding(10, 30, 4, seed=1).data)
    with pytest.raises(InputError):
        sparse_embedding(3, 2, 3, seed=0)


def test_sparse_embedding_permutation_case(rng):
    for seed in range(20):
        G = sparse_embedding(5, 5, 1, seed).data
        if np.all((G != 0).sum(axis=1) == 1):
            x = rng.standard_normal(5)
            assert np.linalg.norm(G @ x) == pytest.approx(np.linalg.norm(x), rel=1e-15)
            return
    pytest.fail("no permutation draw in 20 seeds")


def test_sparse_embedding_jl(rng):
    d = 8
    G = sparse_embedding(d, 20 * d, 3, seed=2).data
    for _ in range(100):
        x = rng.standard_normal(d)
        assert 0.5 <= np.sum((G @ x) ** 2) / np.sum(x * x) <= 1.5


def test_flatten_worked_example():
    # residual norms (7, 1, 1, 1) against span(e2), total 10, threshold 5
    F = SubspaceQuery(np.array([[0.0], [1.0]]))
    C = np.array([[7.0, 0.0], [1.0, 0.0], [1.0, 0.0], [1.0, 0.0]])
    out = flatten(DenseMatrix(C), F, 1.0)
    res = _kernels.residual_row_norms(out.data, F.basis) * out.row_weights
    np.testing.assert_allclose(res, [3.5, 3.5, 1.0, 1.0, 1.0])
    assert res.sum() == pytest.approx(10.0)
    assert out.origin.tolist() == [0, 0, 1, 2, 3]
    assert out.copy_id.tolist() == [0, 1, 0, 0, 0]


def test_flatten_noop_cases(rng):
    X = rng.standard_normal((50, 3)) * 0.01 + 1.0
    F = SubspaceQuery(np.eye(3)[:, :1])
    assert flatten(X, F, 1.0).n == 50
    A = exact_low_rank(20, 4, 2, seed=1)
    Vt = np.linalg.svd(A)[2]
    out = flatten(DenseMatrix(A), SubspaceQuery(Vt[:2].T), 1.0)
    assert out.n == 20


@pytest.mark.parametrize("p", [1.0, 1.5])
def test_flatten_properties(p):
    A = low_rank_plus_noise(300, 8, 2, heavy_tail=True, seed=3)
    M = DenseMatrix(A)
    F = bicriteria_subspace(M, p, 2, 0.1, seed=1, max_rank=2)
    out = flatten(M, F, p)
    assert M.n <= out.n <= 1.5 * M.n
    res = _kernels.residual_row_norms(out.data, F.basis) * out.row_weights
    total = float(np.sum(res ** p))
    assert np.all(res ** p <= 2.0 / M.n * total * (1 + 1e-12))
    # copies of one original row add back to its cost share
    share = np.zeros(M.n)
    np.add.at(share, out.origin, out.row_weights ** p)
    np.testing.assert_allclose(share, 1.0, rtol=1e-12)
    fro = np.sqrt(np.sum(res ** 2))
    assert fro <= (2.0 / M.n) ** (1 / p - 0.5) * total ** (1 / p) * (1 + 1e-12)
    r = np.random.default_rng(0)
    for _ in range(100):
        Q = SubspaceQuery(orthonormal(r, 8, 2))
        assert residual_cost(out, Q, p) == pytest.approx(residual_cost(M, Q, p), rel=1e-9)


@given(st.integers(0, 2**31), st.sampled_from([1.0, 1.25, 1.5, 1.75]))
def test_flatten_preserves_cost_random(seed, p):
    r = np.random.default_rng(seed)
    n, d = int(r.integers(4, 40)), int(r.integers(2, 6))
    A = r.standard_normal((n, d)) * r.pareto(1.0, size=(n, 1))
    F = SubspaceQuery(orthonormal(r, d, 1))
    out = flatten(DenseMatrix(A), F, p)
    assert n <= out.n <= 1.5 * n + 1e-9
    Q = SubspaceQuery(orthonormal(r, d, 1))
    assert residual_cost(out, Q, p) == pytest.approx(residual_cost(A, Q, p), rel=1e-9)
    assert pq_norm(out, p) == pytest.approx(pq_norm(A, p), rel=1e-9)


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0])
def test_bicriteria_exact_rank(p):
    for seed in range(3):
        A = exact_low_rank(200, 10, 3, seed=seed)
        F = bicriteria_subspace(A, p, 3, 0.1, seed=seed)
        if F.meta["cost"] <= zero_cost_rtol(p) * pq_norm(A, p):
            break
    else:
        pytest.fail("bicriteria missed the row space in 3 seeds")
    assert F.meta["cost"] == pytest.approx(residual_cost(A, F, p))


def test_bicriteria_identity():
    F = bicriteria_subspace(np.eye(4), 1.0, 1, 0.1, seed=0)
    assert F.meta["cost"] <= 3.0 + 1e-12
    assert brute_force_opt(np.eye(4), 1.0, 1, starts=10) == pytest.approx(3.0, rel=1e-6)


def test_bicriteria_small_ratio():
    worst = 0.0
    for seed in range(20):
        A = low_rank_plus_noise(150, 6, 2, seed=seed)
        F = bicriteria_subspace(A, 1.0, 2, 0.1, seed=seed, max_rank=4)
        worst = max(worst, F.meta["cost"] / brute_force_opt(A, 1.0, 2, starts=10, seed=seed))
    assert worst <= 10.0


def test_bicriteria_input_checks(rng):
    X = rng.standard_normal((10, 3))
    with pytest.raises(InputError):
        bicriteria_subspace(X, 2.5, 1, 0.1, 0)
    with pytest.raises(InputError):
        bicriteria_subspace(X, 1.0, 0, 0.1, 0)
    F = bicriteria_subspace(X, 1.0, 1, 0.1, 0, max_rank=2)
    assert F.k <= 2 and F.meta["rank"] == F.k
