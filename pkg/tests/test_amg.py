import numpy as np
import pytest

from powerblock.amg import aggregate, amg_setup, amg_vcycle, galerkin, prolongator, strong_neighbors
from powerblock.levels import prepare_blocking
from powerblock.sparse import CsrMatrix, gen_poisson


def vcycle_matrix(H):
    n = H.n_rows
    return np.column_stack([amg_vcycle(H, e) for e in np.eye(n)])


def random_spd(n, seed):
    rng = np.random.default_rng(seed)
    B = (rng.random((n, n)) < 0.15) * rng.uniform(-1, 0, (n, n))
    S = np.triu(B, 1)
    S = S + S.T
    return S + np.diag(np.abs(S).sum(axis=1) + rng.uniform(0.1, 1.0, n))


def test_greedy_pairs_on_path():
    agg = aggregate(gen_poisson((8,)), scheme="greedy")
    assert agg.tolist() == [0, 0, 1, 1, 2, 2, 3, 3]


def test_greedy_coarse_matrix_1d():
    A = gen_poisson((8,))
    agg = aggregate(A, scheme="greedy")
    Ac = galerkin(A, agg, 4)
    T = 2 * np.eye(4) - np.eye(4, k=1) - np.eye(4, k=-1)
    np.testing.assert_array_equal(Ac.to_dense(), T)


@pytest.mark.parametrize("scheme", ["uncoupled", "greedy"])
@pytest.mark.parametrize("seed", range(5))
def test_galerkin_matches_dense_triple_product(scheme, seed):
    D = random_spd(48, seed)
    A = CsrMatrix.from_dense(D)
    agg = aggregate(A, scheme=scheme)
    nc = int(agg.max()) + 1
    P = prolongator(agg, nc).to_dense()
    ref = P.T @ D @ P
    got = galerkin(A, agg, nc).to_dense()
    assert np.max(np.abs(got - ref)) <= 1e-14 * np.max(np.abs(ref))


def test_aggregates_cover_and_are_connected_sets():
    A = gen_poisson((20, 20))
    agg = aggregate(A)
    nc = agg.max() + 1
    assert set(agg.tolist()) == set(range(nc))
    assert np.bincount(agg).min() >= 2
    S = strong_neighbors(A)
    assert S.nnz == A.nnz - A.n_rows


def test_unknown_scheme():
    with pytest.raises(ValueError):
        aggregate(gen_poisson((4,)), scheme="smoothed")


def test_single_level_direct_solve():
    A = gen_poisson((5, 5))
    H = amg_setup(A, coarse_threshold=500)
    assert H.n_levels == 1
    v = np.arange(25.0)
    np.testing.assert_allclose(A.to_dense() @ amg_vcycle(H, v), v, atol=1e-12)
    assert amg_setup(gen_poisson((30, 30)), max_levels=1).n_levels == 1


def test_zero_rhs():
    H = amg_setup(gen_poisson((30, 30)), coarse_threshold=50)
    assert np.all(amg_vcycle(H, np.zeros(900)) == 0)


@pytest.mark.parametrize("scheme", ["greedy", "uncoupled"])
def test_two_level_1d_reduction_factor(scheme):
    A = gen_poisson((8,))
    H = amg_setup(A, max_levels=2, coarse_threshold=4,
                  smoother_spec={"type": "gs2", "gamma": 1, "sweeps": 1}, aggregation=scheme)
    assert H.n_levels == 2
    E = np.eye(8) - vcycle_matrix(H) @ A.to_dense()
    rho = max(abs(np.linalg.eigvals(E)))
    assert rho <= 0.5


def test_vcycle_is_linear():
    A = gen_poisson((24, 24))
    H = amg_setup(A, coarse_threshold=40)
    rng = np.random.default_rng(0)
    v1, v2 = rng.standard_normal((2, A.n_rows))
    lhs = amg_vcycle(H, v1 + v2)
    rhs = amg_vcycle(H, v1) + amg_vcycle(H, v2)
    assert np.linalg.norm(lhs - rhs) <= 1e-12 * np.linalg.norm(lhs)


@pytest.mark.parametrize("smoother", [{"type": "gs2", "gamma": 1, "sweeps": 2},
                                      {"type": "cheby", "degree": 3}])
def test_blocked_finest_level_bitwise(smoother):
    A = gen_poisson((40, 40))
    B = prepare_blocking(A, 40_000, 3)
    H = amg_setup(B.A_perm, coarse_threshold=60, smoother_spec=smoother, plan=B.plan)
    H0 = H.with_plan(None)
    v = B.to_perm(np.random.default_rng(1).standard_normal(A.n_rows))
    assert np.array_equal(amg_vcycle(H, v), amg_vcycle(H0, v))


def test_vcycle_reduces_error_2d():
    A = gen_poisson((32, 32))
    H = amg_setup(A, coarse_threshold=30)
    assert H.n_levels >= 3
    D = A.to_dense()
    x = np.random.default_rng(2).standard_normal(A.n_rows)
    b = D @ x
    err = x.copy()
    xk = np.zeros_like(x)
    for _ in range(5):
        xk = xk + amg_vcycle(H, b - D @ xk)
    assert np.linalg.norm(x - xk) < 0.05 * np.linalg.norm(err)


def test_stagnation_warns():
    # no off-diagonal couplings: every node is its own aggregate
    A = CsrMatrix.from_dense(np.diag(np.arange(1.0, 11.0)))
    with pytest.warns(RuntimeWarning):
        H = amg_setup(A, coarse_threshold=2)
    assert H.n_levels == 1
