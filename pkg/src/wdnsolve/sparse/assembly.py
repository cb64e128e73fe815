"""Fixed-pattern assembly of weighted Gram matrices B^T W B.

B^T W B = sum_i w_i b_i b_i^T over the rows b_i of B. The structural pattern
is the union over *all* rows, regardless of the current weights, so the
result can always be factored against one symbolic analysis.
"""

from __future__ import annotations

import numpy as np

from wdnsolve.errors import DimensionMismatch, PatternMismatch
from wdnsolve.sparse.csc import SparseMatrix, Symmetry


class GramAssembler:
    """Precomputed contribution map for ``B^T diag(w) B`` (lower triangle stored)."""

    def __init__(self, b: SparseMatrix):
        self.nrows = b.nrows
        self.m = b.ncols
        # CSR view of B
        order = np.lexsort((b.col_idx, b.row_idx))
        rows = b.row_idx[order]
        cols = b.col_idx[order]
        vals = b.values[order].astype(np.float64)
        rptr = np.zeros(b.nrows + 1, dtype=np.int64)
        np.add.at(rptr, rows + 1, 1)
        rptr = np.cumsum(rptr)

        c_row, c_r, c_c, c_coef = [], [], [], []
        for i in range(b.nrows):
            a, e = rptr[i], rptr[i + 1]
            cs, vs = cols[a:e], vals[a:e]
            # every pair (p, q) with cs[p] >= cs[q]; cs is sorted ascending
            for p in range(e - a):
                for q in range(p + 1):
                    c_row.append(i)
                    c_r.append(cs[p])
                    c_c.append(cs[q])
                    c_coef.append(vs[p] * vs[q])
        c_row = np.asarray(c_row, dtype=np.int64)
        c_r = np.asarray(c_r, dtype=np.int64)
        c_c = np.asarray(c_c, dtype=np.int64)

        self.pattern = SparseMatrix.from_triplets(
            self.m, self.m, c_r, c_c, np.zeros(c_r.size), Symmetry.LOWER)
        # slot of each contribution inside pattern.values
        p = self.pattern
        key_pat = p.col_idx * self.m + p.row_idx
        key = c_c * self.m + c_r
        slot = np.searchsorted(key_pat, key)
        self._slot = slot
        self._row = c_row
        self._coef = np.asarray(c_coef, dtype=np.float64)
        # contributions are generated row by row
        self._cptr = np.zeros(b.nrows + 1, dtype=np.int64)
        np.add.at(self._cptr, c_row + 1, 1)
        self._cptr = np.cumsum(self._cptr)
        self.active_rows = np.flatnonzero(np.diff(rptr) > 0)

    @property
    def nnz(self):
        return self.pattern.nnz

    def _check_weights(self, w):
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (self.nrows,):
            raise DimensionMismatch(f"weights must have length {self.nrows}, got {w.shape}")
        return w

    def full(self, w) -> SparseMatrix:
        w = self._check_weights(w)
        vals = np.bincount(self._slot, weights=w[self._row] * self._coef, minlength=self.nnz)
        return self.pattern.with_values(vals)

    def update(self, prev: SparseMatrix, w_new, w_old, subset) -> SparseMatrix:
        """prev + sum_{i in subset} (w_new_i - w_old_i) b_i b_i^T."""
        if not prev.same_pattern(self.pattern):
            raise PatternMismatch("previous matrix does not carry the full assembly pattern")
        subset = np.asarray(subset, dtype=np.int64)
        if subset.size == 0:
            return prev
        w_new = self._check_weights(w_new)
        w_old = self._check_weights(w_old)
        starts = self._cptr[subset]
        lens = self._cptr[subset + 1] - starts
        total = int(lens.sum())
        if total == 0:
            return prev
        # flattened contribution indices of all rows in subset
        offs = np.repeat(starts - np.concatenate(([0], np.cumsum(lens)[:-1])), lens)
        idx = offs + np.arange(total)
        dw = (w_new - w_old)[self._row[idx]]
        vals = prev.values + np.bincount(self._slot[idx], weights=dw * self._coef[idx],
                                         minlength=self.nnz)
        return prev.with_values(vals)


def assemble_ztfz(assembler: GramAssembler, f, prev=None, delta_set=None, f_prev=None):
    """Assemble Z^T diag(f) Z, either from scratch or incrementally.

    With ``prev`` and ``delta_set`` only the rows in ``delta_set`` are
    re-weighted, using ``f_prev`` as the weights already baked into ``prev``.
    """
    if prev is None or delta_set is None:
        return assembler.full(f)
    if f_prev is None:
        raise ValueError("incremental assembly needs the previous weights")
    return assembler.update(prev, f, f_prev, delta_set)
