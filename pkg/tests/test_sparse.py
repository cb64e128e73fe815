import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wdnsolve.errors import DimensionMismatch, NotPositiveDefinite, PatternMismatch
from wdnsolve.sparse import (
    GramAssembler,
    SparseMatrix,
    Symmetry,
    assemble_ztfz,
    cholesky,
    fill_reducing_order,
    natural_order,
    numeric_cholesky,
    read_matrix_market,
    solve_factored,
    symbolic_cholesky,
)


def lower(dense):
    return SparseMatrix.from_dense(np.tril(dense), Symmetry.LOWER)


def random_spd(rng, n, density=0.3):
    m = rng.random((n, n)) * (rng.random((n, n)) < density)
    a = m + m.T
    a += np.diag(np.abs(a).sum(axis=1) + rng.uniform(0.5, 2.0, n))
    return a


def permuted(a_dense, perm):
    return a_dense[np.ix_(perm, perm)]


# -- storage -------------------------------------------------------------------

def test_csc_invariants_and_roundtrip():
    rng = np.random.default_rng(0)
    d = rng.random((6, 4)) * (rng.random((6, 4)) < 0.5)
    a = SparseMatrix.from_dense(d)
    assert a.col_ptr[-1] == a.nnz
    assert np.all(np.diff(a.col_ptr) >= 0)
    for j in range(a.ncols):
        rows = a.row_idx[a.col_ptr[j]:a.col_ptr[j + 1]]
        assert np.all(np.diff(rows) > 0)
    np.testing.assert_array_equal(a.to_dense(), d)
    np.testing.assert_array_equal(a.T.to_dense(), d.T)
    x = rng.random(4)
    np.testing.assert_allclose(a @ x, d @ x)
    np.testing.assert_allclose(a.rmatvec(rng.random(6) * 0 + 1), d.T @ np.ones(6))


def test_triplets_sum_duplicates():
    a = SparseMatrix.from_triplets(2, 2, [0, 0, 1], [0, 0, 1], [1.0, 2.0, 5.0])
    np.testing.assert_array_equal(a.to_dense(), [[3.0, 0.0], [0.0, 5.0]])


def test_values_are_read_only():
    a = SparseMatrix.from_dense(np.eye(2))
    with pytest.raises(ValueError):
        a.values[0] = 3.0


def test_matrix_market_roundtrip(tmp_path):
    from wdnsolve.sparse import write_matrix_market

    a = SparseMatrix.from_dense(np.array([[1.5, 0.0], [-2.0, 3.0]]))
    write_matrix_market(tmp_path / "a.mtx", a)
    b = read_matrix_market(tmp_path / "a.mtx")
    np.testing.assert_array_equal(b.to_dense(), a.to_dense())


# -- ordering ------------------------------------------------------------------

def nnz_l(pattern, perm):
    return symbolic_cholesky(pattern, perm).nnz_L


def test_identity_pattern():
    a = lower(np.eye(7))
    assert nnz_l(a, fill_reducing_order(a)) == 7


def test_arrow_matrix_hub_goes_last():
    d = np.eye(5) * 4
    d[0, :] = d[:, 0] = 1
    d[0, 0] = 10
    a = lower(d)
    assert nnz_l(a, natural_order(5)) == 15
    perm = fill_reducing_order(a)
    # once only the hub and one leaf remain they tie; either order is fill-free
    assert 0 in perm[-2:]
    assert nnz_l(a, perm) == 9


def test_tridiagonal_no_fill():
    d = 4 * np.eye(10) - np.eye(10, k=1) - np.eye(10, k=-1)
    a = lower(d)
    assert nnz_l(a, fill_reducing_order(a)) == 19


def test_ordering_never_worse_than_natural_on_networks():
    from wdnsolve import fixtures as fx
    from wdnsolve.nullbasis import build_fundamental_basis

    for net in (fx.grid(), fx.random_network(3), fx.random_network(11)):
        basis = build_fundamental_basis(net.A12, net.A10)
        for b in (net.A12, basis.Z):
            if b.ncols == 0:
                continue
            pat = GramAssembler(b).pattern
            assert nnz_l(pat, fill_reducing_order(pat)) <= nnz_l(pat, natural_order(pat.ncols))


# -- symbolic / numeric --------------------------------------------------------

def test_symbolic_examples():
    assert symbolic_cholesky(lower(np.eye(4))).nnz_L == 4
    s = symbolic_cholesky(lower(np.ones((2, 2))))
    assert s.nnz_L == 3
    np.testing.assert_array_equal(np.tril(s.pattern().to_dense()), np.ones((2, 2)) * np.tri(2))


def test_symbolic_contains_input_pattern():
    rng = np.random.default_rng(4)
    d = random_spd(rng, 15)
    a = lower(d)
    s = symbolic_cholesky(a)
    lp = s.pattern().to_dense() != 0
    pa = np.tril(permuted(d, s.perm)) != 0
    assert np.all(lp[pa])


def test_numeric_examples():
    fac = cholesky(lower(np.eye(3)))
    np.testing.assert_array_equal(fac.L.to_dense(), np.eye(3))
    fac = cholesky(lower(np.array([[4.0, 2.0], [2.0, 3.0]])), perm=[0, 1])
    np.testing.assert_allclose(fac.L.to_dense(), [[2.0, 0.0], [1.0, np.sqrt(2.0)]], rtol=1e-15)
    with pytest.raises(NotPositiveDefinite):
        cholesky(lower(np.array([[1.0, 2.0], [2.0, 1.0]])))


def test_solve_examples():
    b = np.array([1.0, -2.0, 3.5])
    np.testing.assert_array_equal(solve_factored(cholesky(lower(np.eye(3))), b), b)
    fac = cholesky(lower(np.array([[4.0, 2.0], [2.0, 3.0]])))
    np.testing.assert_allclose(solve_factored(fac, [8.0, 7.0]), [1.25, 1.5], rtol=1e-15)
    with pytest.raises(DimensionMismatch):
        solve_factored(fac, np.ones(3))


def test_random_spd_20_vs_dense():
    rng = np.random.default_rng(20)
    d = random_spd(rng, 20)
    b = rng.standard_normal(20)
    x = solve_factored(cholesky(lower(d)), b)
    np.testing.assert_allclose(x, np.linalg.solve(d, b), rtol=0, atol=1e-9)


def test_general_storage_equivalent_to_lower():
    rng = np.random.default_rng(5)
    d = random_spd(rng, 12)
    f1 = cholesky(lower(d))
    f2 = cholesky(SparseMatrix.from_dense(d))
    np.testing.assert_array_equal(f1.L_values, f2.L_values)


def test_pattern_mismatch():
    d = np.diag([2.0, 3.0, 4.0])
    s = symbolic_cholesky(lower(d), perm=[0, 1, 2])
    full = np.array([[2.0, 0.0, 1.0], [0.0, 3.0, 0.0], [1.0, 0.0, 4.0]])
    with pytest.raises(PatternMismatch):
        numeric_cholesky(lower(full), s)


def test_subset_pattern_is_accepted():
    full = np.array([[4.0, 1.0, 0.0], [1.0, 4.0, 1.0], [0.0, 1.0, 4.0]])
    s = symbolic_cholesky(lower(full))
    sub = np.diag([4.0, 5.0, 6.0])
    fac = numeric_cholesky(lower(sub), s)
    np.testing.assert_allclose(solve_factored(fac, [4.0, 5.0, 6.0]), np.ones(3))


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 50), seed=st.integers(0, 2**31 - 1), density=st.floats(0.02, 0.6))
def test_reconstruction_and_solve_property(n, seed, density):
    rng = np.random.default_rng(seed)
    d = random_spd(rng, n, density)
    a = lower(d)
    fac = cholesky(a)
    L = fac.L.to_dense()
    pap = permuted(d, fac.perm)
    assert np.abs(pap - L @ L.T).max() <= 1e-10 * np.abs(d).sum(axis=1).max()
    b = rng.standard_normal(n)
    x = solve_factored(fac, b)
    assert np.abs(x - np.linalg.solve(d, b)).max() <= 1e-9
    assert np.abs(d @ x - b).max() <= 1e-8 * (np.abs(d).sum(axis=1).max() * np.abs(x).max() + np.abs(b).max())


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_symbolic_reuse_is_bit_identical(seed):
    rng = np.random.default_rng(seed)
    d1 = random_spd(rng, 25)
    d2 = d1 * (d1 != 0) * rng.uniform(0.5, 1.5, d1.shape)
    d2 = (d2 + d2.T) / 2 + np.diag(np.abs(d2).sum(axis=1))
    a2 = lower(d2)
    shared = symbolic_cholesky(lower(d1))
    reused = numeric_cholesky(a2, shared)
    fresh = numeric_cholesky(a2, symbolic_cholesky(a2))
    again = numeric_cholesky(a2, shared)
    np.testing.assert_array_equal(reused.L_values, again.L_values)
    np.testing.assert_array_equal(reused.L_values, fresh.L_values)


# -- Gram assembly ----------------------------------------------------------------

def test_single_loop_gram():
    z = SparseMatrix.from_dense(np.array([[1], [-1], [1], [-1]], dtype=np.int8))
    f = np.array([1.0, 2.0, 3.0, 4.0])
    x = assemble_ztfz(GramAssembler(z), f)
    np.testing.assert_allclose(x.to_dense(), [[10.0]])


def test_empty_delta_returns_prev():
    rng = np.random.default_rng(1)
    z = SparseMatrix.from_dense(rng.integers(-1, 2, (8, 3)).astype(np.int8))
    asm = GramAssembler(z)
    f = rng.random(8)
    x = assemble_ztfz(asm, f)
    y = assemble_ztfz(asm, f * 2, prev=x, delta_set=[], f_prev=f)
    np.testing.assert_array_equal(y.values, x.values)


def test_pattern_mismatch_on_prev():
    rng = np.random.default_rng(2)
    z = SparseMatrix.from_dense(rng.integers(-1, 2, (8, 3)).astype(np.int8))
    asm = GramAssembler(z)
    with pytest.raises(PatternMismatch):
        assemble_ztfz(asm, np.ones(8), prev=lower(np.eye(3)), delta_set=[0], f_prev=np.ones(8))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), rounds=st.integers(1, 6))
def test_incremental_equals_full(seed, rounds):
    rng = np.random.default_rng(seed)
    n_p, n_l = int(rng.integers(3, 30)), int(rng.integers(1, 8))
    z = SparseMatrix.from_dense(
        (rng.integers(-1, 2, (n_p, n_l)) * (rng.random((n_p, n_l)) < 0.4)).astype(np.int8))
    asm = GramAssembler(z)
    f = rng.uniform(0.1, 10.0, n_p)
    x = assemble_ztfz(asm, f)
    for _ in range(rounds):
        sub = np.flatnonzero(rng.random(n_p) < 0.3)
        g = f.copy()
        g[sub] = rng.uniform(0.1, 10.0, sub.size)
        x = assemble_ztfz(asm, g, prev=x, delta_set=sub, f_prev=f)
        f = g
    full = assemble_ztfz(asm, f)
    assert x.same_pattern(full)
    scale = max(np.abs(full.values).max(initial=0.0), 1.0)
    assert np.abs(x.values - full.values).max(initial=0.0) <= 1e-12 * scale
    dense = z.to_dense().astype(float)
    np.testing.assert_allclose(np.tril(full.to_dense()), np.tril(dense.T @ np.diag(f) @ dense), atol=1e-12)
