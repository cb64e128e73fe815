"""Sparse fundamental null basis of A12^T and its diagnostics.

The spanning tree is grown the way the reformulated co-tree method pivots on
A12: an incidence row with a single unresolved junction is a pivot, its
junction becomes resolved, and the process repeats until every junction is
resolved. All fixed-head nodes count as resolved from the start, so they act
as one common root. Pipes never chosen as pivots are the chords; each chord
closes one fundamental loop (a column of Z).
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass

import numpy as np

from wdnsolve.errors import RankDeficient
from wdnsolve.sparse.assembly import GramAssembler
from wdnsolve.sparse.cholesky import cholesky, solve_factored
from wdnsolve.sparse.csc import SparseMatrix


@dataclass(frozen=True, eq=False)
class NullBasis:
    Z: SparseMatrix  # n_p x n_l, int8 entries in {-1, 0, 1}
    E2: np.ndarray  # sorted pipes with a nonzero row in Z
    tree_edges: np.ndarray  # in pivot order
    chord_edges: np.ndarray  # ascending; column j of Z belongs to chord_edges[j]
    row_perm: np.ndarray  # pipes: tree edges (pivot order) then chords
    col_perm: np.ndarray  # junctions in pivot order

    @property
    def n_l(self) -> int:
        return self.Z.ncols

    @property
    def n_p(self) -> int:
        return self.Z.nrows


def _pipe_ends(a12: SparseMatrix, a10: SparseMatrix):
    """Per pipe: (tail, head) in contracted node ids; every fixed head maps to root = n_n."""
    n_p, n_n = a12.shape
    root = n_n
    tail = np.full(n_p, root, dtype=np.int64)
    head = np.full(n_p, root, dtype=np.int64)
    rows, cols, vals = a12.row_idx, a12.col_idx, a12.values
    tail[rows[vals < 0]] = cols[vals < 0]
    head[rows[vals > 0]] = cols[vals > 0]
    # sanity: every pipe has one leaving and one entering end across [A12 | A10]
    ends = np.bincount(rows, minlength=n_p) + np.bincount(a10.row_idx, minlength=n_p)
    if np.any(ends != 2):
        raise ValueError("each incidence row must have exactly two nonzeros")
    return tail, head


def build_fundamental_basis(a12: SparseMatrix, a10: SparseMatrix) -> NullBasis:
    n_p, n_n = a12.shape
    root = n_n
    tail, head = _pipe_ends(a12, a10)
    tail_l, head_l = tail.tolist(), head.tolist()

    incident = [[] for _ in range(n_n + 1)]
    for j in range(n_p):
        incident[tail_l[j]].append(j)
        incident[head_l[j]].append(j)

    resolved = [False] * (n_n + 1)
    resolved[root] = True
    parent_node = [-1] * (n_n + 1)
    parent_edge = [-1] * (n_n + 1)
    depth = [0] * (n_n + 1)
    # candidate pivots: pipes with exactly one unresolved end, lowest index first
    heap = [j for j in incident[root] if tail_l[j] != head_l[j]]
    heapq.heapify(heap)
    tree, order = [], []
    while heap:
        j = heapq.heappop(heap)
        a, b = tail_l[j], head_l[j]
        if resolved[a] and resolved[b]:
            continue  # became a chord
        new, old = (b, a) if resolved[a] else (a, b)
        resolved[new] = True
        parent_node[new] = old
        parent_edge[new] = j
        depth[new] = depth[old] + 1
        tree.append(j)
        order.append(new)
        for e in incident[new]:
            other = head_l[e] if tail_l[e] == new else tail_l[e]
            if not resolved[other]:
                heapq.heappush(heap, e)
    if len(tree) != n_n:
        raise RankDeficient(f"only {len(tree)} of {n_n} junctions could be pivoted; "
                            "A12 is rank deficient (disconnected or no fixed head)")

    in_tree = np.zeros(n_p, dtype=bool)
    in_tree[tree] = True
    chords = np.flatnonzero(~in_tree)

    rows, cols, vals = [], [], []
    for col, c in enumerate(chords.tolist()):
        # loop: along the chord tail -> head, then back through the tree head -> tail
        rows.append(c), cols.append(col), vals.append(1)
        u, v = head_l[c], tail_l[c]  # walk from u to v through the tree
        up_u, up_v = [], []
        while u != v:
            if depth[u] >= depth[v]:
                up_u.append(u)
                u = parent_node[u]
            else:
                up_v.append(v)
                v = parent_node[v]
        for x in up_u:  # traversed child -> parent
            e = parent_edge[x]
            rows.append(e), cols.append(col), vals.append(1 if tail_l[e] == x else -1)
        for x in up_v:  # traversed parent -> child
            e = parent_edge[x]
            rows.append(e), cols.append(col), vals.append(1 if head_l[e] == x else -1)

    Z = SparseMatrix.from_triplets(n_p, chords.size, rows, cols, vals, dtype=np.int8)
    E2 = np.unique(np.asarray(rows, dtype=np.int64))
    row_perm = np.concatenate((np.asarray(tree, dtype=np.int64), chords))
    return NullBasis(Z, E2, np.asarray(tree, dtype=np.int64), chords, row_perm,
                     np.asarray(order, dtype=np.int64))


# -- diagnostics -------------------------------------------------------------

@dataclass(frozen=True)
class BasisDiagnostics:
    n_l: int
    cond_ZtZ_estimate: float
    cond_A12tA12_estimate: float
    nnz_ratio: float  # nnz(Z^T F Z) / nnz(A12^T F A12), percent
    loop_fraction: float  # |E2| / n_p, percent
    nnz_Z: int
    n_E2: int

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=1)


def _full_nnz(lower: SparseMatrix) -> int:
    diag = int(np.count_nonzero(lower.row_idx == lower.col_idx))
    return 2 * lower.nnz - diag


def estimate_condition(a: SparseMatrix, iters: int = 20, rtol: float = 1e-6, seed: int = 0) -> float:
    """lambda_max / lambda_min of an SPD matrix via power and inverse iteration.

    Both iterations underestimate their target extremes' separation, so the
    estimate never exceeds the true 2-norm condition number.
    """
    n = a.ncols
    if n == 0:
        return 0.0
    fac = cholesky(a)
    rng = np.random.default_rng(seed)
    start = rng.uniform(0.5, 1.5, size=n)

    def iterate(apply):
        x = start / np.linalg.norm(start)
        lam = 0.0
        for _ in range(iters):
            y = apply(x)
            new = float(x @ y)
            x = y / np.linalg.norm(y)
            if lam and abs(new - lam) <= rtol * abs(new):
                lam = new
                break
            lam = new
        return lam

    lam_max = iterate(a.matvec)
    mu = iterate(lambda x: solve_factored(fac, x))  # largest eigenvalue of A^-1
    return lam_max * mu


def diagnostics(basis: NullBasis, a12: SparseMatrix, F_diag=None) -> BasisDiagnostics:
    """Sparsity and conditioning figures for a basis.

    Patterns are structural (F is taken as a full positive diagonal), so the
    F values only matter if a weighted condition estimate is wanted later.
    """
    n_p = basis.n_p
    if basis.n_l == 0:
        return BasisDiagnostics(0, 0.0, 0.0, 0.0, 0.0, 0, 0)
    ones = np.ones(n_p)
    ztz = GramAssembler(basis.Z).full(ones)
    ata = GramAssembler(a12).full(ones)
    ratio = 100.0 * _full_nnz(ztz) / _full_nnz(ata)
    return BasisDiagnostics(
        n_l=basis.n_l,
        cond_ZtZ_estimate=estimate_condition(ztz),
        cond_A12tA12_estimate=estimate_condition(ata),
        nnz_ratio=ratio,
        loop_fraction=100.0 * basis.E2.size / n_p,
        nnz_Z=basis.Z.nnz,
        n_E2=int(basis.E2.size),
    )
