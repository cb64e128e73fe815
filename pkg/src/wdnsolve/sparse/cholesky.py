"""Up-looking simplicial Cholesky with a reusable symbolic phase.

The symbolic phase (ordering, elimination tree, pattern of L and a scatter
plan for the input pattern) depends only on the sparsity pattern, so one
:class:`SymbolicFactor` serves every matrix with that pattern.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt

import numpy as np

from wdnsolve.errors import DimensionMismatch, NotPositiveDefinite, PatternMismatch
from wdnsolve.sparse.csc import SparseMatrix, Symmetry
from wdnsolve.sparse.ordering import fill_reducing_order


def _lower_entries(a: SparseMatrix):
    """Storage indices of the entries with row >= col (the half we consume)."""
    return np.flatnonzero(a.row_idx >= a.col_idx)


def _scatter_plan(a: SparseMatrix, pinv: np.ndarray):
    """Map A's lower-triangle entries onto the upper triangle of P A P^T.

    Returns (ptr, src, row): for column k of the permuted upper triangle the
    slice ptr[k]:ptr[k+1] lists source storage indices and target rows.
    """
    src = _lower_entries(a)
    pi = pinv[a.row_idx[src]]
    pj = pinv[a.col_idx[src]]
    col = np.maximum(pi, pj)
    row = np.minimum(pi, pj)
    order = np.lexsort((row, col))
    src, col, row = src[order], col[order], row[order]
    ptr = np.zeros(a.ncols + 1, dtype=np.int64)
    np.add.at(ptr, col + 1, 1)
    return np.cumsum(ptr), src, row


def elimination_tree(n, plan_ptr, plan_row):
    """Liu's algorithm with path compression on the upper-triangle columns."""
    parent = [-1] * n
    ancestor = [-1] * n
    ptr = plan_ptr.tolist()
    rows = plan_row.tolist()
    for k in range(n):
        for p in range(ptr[k], ptr[k + 1]):
            i = rows[p]
            while i != -1 and i < k:
                nxt = ancestor[i]
                ancestor[i] = k
                if nxt == -1:
                    parent[i] = k
                i = nxt
    return parent


@dataclass(frozen=True, eq=False)
class SymbolicFactor:
    n: int
    perm: np.ndarray  # perm[k] = original index of permuted row k
    pinv: np.ndarray
    etree: np.ndarray
    L_col_ptr: np.ndarray
    L_row_idx: np.ndarray
    # CSR view of the strictly-lower part of L: row k holds columns
    # row_cols[row_ptr[k]:row_ptr[k+1]] stored at L positions row_pos[...]
    row_ptr: np.ndarray
    row_cols: np.ndarray
    row_pos: np.ndarray
    # pattern the factor was analysed for, with its scatter plan
    source: SparseMatrix = field(repr=False)
    plan: tuple = field(repr=False)
    _lists: dict = field(default_factory=dict, repr=False)

    @property
    def nnz_L(self) -> int:
        return int(self.L_col_ptr[-1])

    def pattern(self) -> SparseMatrix:
        return SparseMatrix(self.n, self.n, self.L_col_ptr, self.L_row_idx,
                            np.ones(self.nnz_L), Symmetry.GENERAL)

    def lists(self):
        # python lists are much faster than numpy scalars in the inner loops
        if not self._lists:
            self._lists.update(
                Lp=self.L_col_ptr.tolist(), Li=self.L_row_idx.tolist(),
                rp=self.row_ptr.tolist(), rc=self.row_cols.tolist(), rpos=self.row_pos.tolist(),
            )
        return self._lists


def symbolic_cholesky(pattern: SparseMatrix, perm=None) -> SymbolicFactor:
    """Analyse ``pattern`` (square, structurally symmetric).

    ``perm`` defaults to the minimum-degree ordering.
    """
    if pattern.nrows != pattern.ncols:
        raise DimensionMismatch("Cholesky needs a square matrix")
    n = pattern.ncols
    if perm is None:
        perm = fill_reducing_order(pattern)
    perm = np.asarray(perm, dtype=np.int64)
    if perm.shape != (n,) or not np.array_equal(np.sort(perm), np.arange(n)):
        raise ValueError("perm is not a permutation")
    pinv = np.empty(n, dtype=np.int64)
    pinv[perm] = np.arange(n)

    plan = _scatter_plan(pattern, pinv)
    ptr, _, prow = plan
    parent = elimination_tree(n, ptr, prow)

    # row patterns of L by walking the etree from each upper-triangle entry
    ptr_l = ptr.tolist()
    prow_l = prow.tolist()
    flag = [-1] * n
    row_pattern = []
    for k in range(n):
        flag[k] = k
        reach = []
        for p in range(ptr_l[k], ptr_l[k + 1]):
            i = prow_l[p]
            while i != -1 and flag[i] != k:
                reach.append(i)
                flag[i] = k
                i = parent[i]
        reach.sort()
        row_pattern.append(reach)

    counts = [1] * n
    for reach in row_pattern:
        for j in reach:
            counts[j] += 1
    Lp = [0] * (n + 1)
    for j in range(n):
        Lp[j + 1] = Lp[j] + counts[j]
    Li = [0] * Lp[n]
    nxt = [p + 1 for p in Lp[:n]]  # next free slot below the diagonal
    for j in range(n):
        Li[Lp[j]] = j
    row_ptr = [0] * (n + 1)
    row_cols, row_pos = [], []
    for k, reach in enumerate(row_pattern):
        for j in reach:
            Li[nxt[j]] = k
            row_cols.append(j)
            row_pos.append(nxt[j])
            nxt[j] += 1
        row_ptr[k + 1] = len(row_cols)

    i64 = lambda v: np.asarray(v, dtype=np.int64)  # noqa: E731
    out = SymbolicFactor(
        n=n, perm=perm, pinv=pinv, etree=i64(parent),
        L_col_ptr=i64(Lp), L_row_idx=i64(Li),
        row_ptr=i64(row_ptr), row_cols=i64(row_cols), row_pos=i64(row_pos),
        source=pattern, plan=plan,
    )
    for arr in (out.perm, out.pinv, out.etree, out.L_col_ptr, out.L_row_idx,
                out.row_ptr, out.row_cols, out.row_pos):
        arr.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class NumericFactor:
    symbolic: SymbolicFactor
    L_values: np.ndarray

    @property
    def n(self):
        return self.symbolic.n

    @property
    def perm(self):
        return self.symbolic.perm

    @property
    def L(self) -> SparseMatrix:
        s = self.symbolic
        return SparseMatrix(s.n, s.n, s.L_col_ptr, s.L_row_idx, self.L_values)


def _plan_for(a: SparseMatrix, symb: SymbolicFactor):
    if a.same_pattern(symb.source):
        return symb.plan
    if a.shape != (symb.n, symb.n):
        raise DimensionMismatch(f"matrix is {a.shape}, factor is {symb.n}x{symb.n}")
    plan = _scatter_plan(a, symb.pinv)
    ptr, _, row = plan
    # every upper entry (r, k), r < k, must be in row k of L
    rp, rc = symb.row_ptr, symb.row_cols
    for k in range(symb.n):
        rows = row[ptr[k]:ptr[k + 1]]
        rows = rows[rows < k]
        if rows.size and not np.all(np.isin(rows, rc[rp[k]:rp[k + 1]])):
            raise PatternMismatch(f"column {k} of the permuted matrix has entries "
                                  "outside the analysed pattern")
    return plan


def numeric_cholesky(a: SparseMatrix, symb: SymbolicFactor) -> NumericFactor:
    """Compute L with P A P^T = L L^T using the pattern fixed by ``symb``."""
    ptr, src, trow = _plan_for(a, symb)
    lst = symb.lists()
    Lp, rp, rc, rpos = lst["Lp"], lst["rp"], lst["rc"], lst["rpos"]
    Li = lst["Li"]
    n = symb.n
    vals = a.values[src].tolist()
    trow = trow.tolist()
    ptr = ptr.tolist()

    Lx = [0.0] * Lp[n]
    x = [0.0] * n
    for k in range(n):
        for p in range(ptr[k], ptr[k + 1]):
            x[trow[p]] += vals[p]
        d = x[k]
        x[k] = 0.0
        for t in range(rp[k], rp[k + 1]):
            j = rc[t]
            lkj = x[j] / Lx[Lp[j]]
            x[j] = 0.0
            for p in range(Lp[j] + 1, rpos[t]):
                x[Li[p]] -= Lx[p] * lkj
            d -= lkj * lkj
            Lx[rpos[t]] = lkj
        if not d > 0.0:
            raise NotPositiveDefinite(
                f"nonpositive pivot {d:.3e} at permuted column {k}", column=int(symb.perm[k]))
        Lx[Lp[k]] = sqrt(d)
    values = np.asarray(Lx)
    values.setflags(write=False)
    return NumericFactor(symb, values)


def cholesky(a: SparseMatrix, perm=None) -> NumericFactor:
    """Symbolic and numeric phases in one call."""
    return numeric_cholesky(a, symbolic_cholesky(a, perm))


def solve_factored(fac: NumericFactor, b) -> np.ndarray:
    """Solve A x = b given P A P^T = L L^T."""
    s = fac.symbolic
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (s.n,):
        raise DimensionMismatch(f"rhs has shape {b.shape}, expected ({s.n},)")
    lst = s.lists()
    Lp, Li = lst["Lp"], lst["Li"]
    Lx = fac.L_values.tolist()
    y = b[s.perm].tolist()
    n = s.n
    for j in range(n):
        yj = y[j] / Lx[Lp[j]]
        y[j] = yj
        for p in range(Lp[j] + 1, Lp[j + 1]):
            y[Li[p]] -= Lx[p] * yj
    for j in range(n - 1, -1, -1):
        acc = y[j]
        for p in range(Lp[j] + 1, Lp[j + 1]):
            acc -= Lx[p] * y[Li[p]]
        y[j] = acc / Lx[Lp[j]]
    x = np.empty(n)
    x[s.perm] = y
    return x
