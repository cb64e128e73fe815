import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wdnsolve import fixtures as fx
from wdnsolve.errors import RankDeficient
from wdnsolve.network import FixedHead, Junction, Network, Pipe
from wdnsolve.nullbasis import build_fundamental_basis, diagnostics, estimate_condition
from wdnsolve.sparse import SparseMatrix, Symmetry


def basis_of(net):
    return build_fundamental_basis(net.A12, net.A10)


def check_basis(net, basis):
    Z = basis.Z.to_dense().astype(np.int64)
    a12 = net.A12.to_dense().astype(np.int64)
    assert basis.Z.values.dtype == np.int8
    assert Z.shape == (net.n_p, net.n_p - net.n_n)
    assert not np.any(a12.T @ Z)
    assert set(np.unique(Z)) <= {-1, 0, 1}
    assert basis.chord_edges.size == basis.n_l
    np.testing.assert_array_equal(Z[basis.chord_edges], np.eye(basis.n_l, dtype=np.int64))
    np.testing.assert_array_equal(basis.E2, np.flatnonzero(np.any(Z != 0, axis=1)))
    assert sorted(np.concatenate((basis.tree_edges, basis.chord_edges))) == list(range(net.n_p))
    np.testing.assert_array_equal(np.diag(Z.T @ Z), np.abs(Z).sum(axis=0))


def test_tree_network():
    net = fx.branched()
    b = basis_of(net)
    assert b.Z.shape == (3, 0)
    assert b.E2.size == 0
    check_basis(net, b)


def test_square_loop():
    net = fx.square_loop()
    b = basis_of(net)
    check_basis(net, b)
    Z = b.Z.to_dense()
    assert Z.shape == (4, 1)
    assert np.count_nonzero(Z) == 4
    # R->a->b->c->R, every pipe oriented along the loop
    assert np.all(Z[:, 0] == Z[0, 0])


def test_parallel_pipes():
    net = fx.parallel_pair()
    b = basis_of(net)
    check_basis(net, b)
    Z = b.Z.to_dense()[:, 0]
    assert np.count_nonzero(Z) == 2
    # the lower index pipe is pivoted first, so P2 is the chord; both run R -> J1
    assert Z.tolist() == [-1, 1]
    flipped = Network.build(net.junctions, net.fixed_heads,
                            [net.pipes[0], Pipe("P2", "J1", "R", 800.0, 0.2, 100.0)])
    assert basis_of(flipped).Z.to_dense()[:, 0].tolist() == [1, 1]


def test_pipe_between_two_reservoirs():
    net = Network.build([Junction("J", 0.01)], [FixedHead("R1", 10.0), FixedHead("R2", 12.0)],
                        [Pipe("P1", "R1", "J", 100.0, 0.1, 100.0),
                         Pipe("P2", "R1", "R2", 100.0, 0.1, 100.0)])
    b = basis_of(net)
    check_basis(net, b)
    assert b.Z.to_dense()[:, 0].tolist() == [0, 1]


def test_rank_deficient():
    a12 = SparseMatrix.from_dense(np.array([[1, 0], [-1, 0], [0, 0]], dtype=np.int8))
    a10 = SparseMatrix.from_dense(np.array([[-1], [1], [0]], dtype=np.int8))
    with pytest.raises((RankDeficient, ValueError)):
        build_fundamental_basis(a12, a10)


def test_deterministic():
    net = fx.random_network(5)
    a, b = basis_of(net), basis_of(net)
    np.testing.assert_array_equal(a.Z.to_dense(), b.Z.to_dense())
    np.testing.assert_array_equal(a.tree_edges, b.tree_edges)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_random_networks(seed):
    net = fx.random_network(seed)
    check_basis(net, basis_of(net))


def test_grid_basis():
    net = fx.grid()
    b = basis_of(net)
    check_basis(net, b)
    assert b.n_l == 81


def test_diagnostics_examples():
    d = diagnostics(basis_of(fx.branched()), fx.branched().A12)
    assert (d.n_l, d.cond_ZtZ_estimate, d.nnz_ratio, d.loop_fraction) == (0, 0.0, 0.0, 0.0)
    d = diagnostics(basis_of(fx.square_loop()), fx.square_loop().A12)
    assert d.n_l == 1
    assert d.cond_ZtZ_estimate == pytest.approx(1.0)
    assert d.loop_fraction == 100.0
    json.loads(d.to_json())


def test_diagnostics_vs_dense_grid():
    net = fx.grid()
    b = basis_of(net)
    d = diagnostics(b, net.A12)
    Z = b.Z.to_dense().astype(float)
    a12 = net.A12.to_dense().astype(float)
    f = np.random.default_rng(0).uniform(1, 2, net.n_p)  # structurally full F
    nnz_ztfz = np.count_nonzero(Z.T @ np.diag(f) @ Z)
    nnz_afa = np.count_nonzero(a12.T @ np.diag(f) @ a12)
    assert d.nnz_ratio == pytest.approx(100.0 * nnz_ztfz / nnz_afa)
    assert d.loop_fraction == pytest.approx(100.0 * np.count_nonzero(np.any(Z != 0, axis=1)) / net.n_p)
    true = np.linalg.cond(Z.T @ Z)
    assert 0.5 * true <= d.cond_ZtZ_estimate <= true * (1 + 1e-9)
    assert d.cond_ZtZ_estimate < d.cond_A12tA12_estimate


def test_estimate_condition_diagonal():
    a = SparseMatrix.from_dense(np.diag([1.0, 2.0, 8.0]), Symmetry.LOWER)
    assert estimate_condition(a, iters=200, rtol=1e-14) == pytest.approx(8.0, rel=1e-6)
