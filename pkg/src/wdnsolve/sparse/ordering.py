"""Minimum-degree fill-reducing ordering."""

from __future__ import annotations

import heapq

import numpy as np

from wdnsolve.sparse.csc import SparseMatrix


def adjacency_sets(a: SparseMatrix) -> list[set]:
    """Off-diagonal adjacency of a structurally symmetric pattern.

    Works for both full and lower-stored matrices; every stored entry is
    mirrored, so a one-sided pattern is symmetrized.
    """
    if a.nrows != a.ncols:
        raise ValueError("pattern must be square")
    adj = [set() for _ in range(a.ncols)]
    for i, j in zip(a.row_idx.tolist(), a.col_idx.tolist()):
        if i != j:
            adj[i].add(j)
            adj[j].add(i)
    return adj


def minimum_degree(a: SparseMatrix) -> np.ndarray:
    """Classic minimum-degree ordering on the quotient graph.

    Eliminated nodes become *elements*: cliques represented by their member
    list instead of explicit fill edges. The degree of a variable is the
    exact size of the union of its variable neighbours and the members of its
    adjacent elements. Ties go to the lowest original index.

    Returns ``perm`` with ``perm[k]`` = original index of the k-th pivot.
    """
    n = a.ncols
    var_adj = adjacency_sets(a)
    elem_adj = [set() for _ in range(n)]  # elements adjacent to each variable
    elem_members: dict[int, set] = {}  # element id (= its pivot) -> variables
    eliminated = np.zeros(n, dtype=bool)

    def degree(i):
        reach = set(var_adj[i])
        for e in elem_adj[i]:
            reach |= elem_members[e]
        reach.discard(i)
        return len(reach)

    deg = [len(s) for s in var_adj]
    heap = [(deg[i], i) for i in range(n)]
    heapq.heapify(heap)
    perm = []
    while heap:
        d, p = heapq.heappop(heap)
        if eliminated[p] or d != deg[p]:
            continue
        eliminated[p] = True
        perm.append(p)

        members = set(var_adj[p])
        absorbed = elem_adj[p]
        for e in absorbed:
            members |= elem_members.pop(e)
        members.discard(p)

        for i in members:
            var_adj[i].discard(p)
            # variables inside the new element are reachable through it
            var_adj[i] -= members
            elem_adj[i] -= absorbed
            elem_adj[i].add(p)
        elem_members[p] = members
        var_adj[p] = set()
        elem_adj[p] = set()

        for i in members:
            nd = degree(i)
            if nd != deg[i]:
                deg[i] = nd
                heapq.heappush(heap, (nd, i))
    return np.asarray(perm, dtype=np.int64)


def fill_reducing_order(a: SparseMatrix) -> np.ndarray:
    return minimum_degree(a)


def natural_order(n: int) -> np.ndarray:
    return np.arange(n, dtype=np.int64)
