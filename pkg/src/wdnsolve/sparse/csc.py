"""Compressed sparse column storage."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from wdnsolve.errors import DimensionMismatch


class Symmetry(enum.Enum):
    GENERAL = "general"
    LOWER = "symmetric-lower"  # symmetric matrix, only i >= j stored


def _frozen(a, dtype):
    a = np.ascontiguousarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Immutable CSC matrix.

    Row indices are strictly increasing inside every column. Matrices with
    ``symmetry=Symmetry.LOWER`` keep only the lower triangle; ``matvec`` and
    ``to_dense`` treat them as the full symmetric matrix.
    """

    nrows: int
    ncols: int
    col_ptr: np.ndarray
    row_idx: np.ndarray
    values: np.ndarray
    symmetry: Symmetry = Symmetry.GENERAL
    _cols: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        col_ptr = _frozen(self.col_ptr, np.int64)
        row_idx = _frozen(self.row_idx, np.int64)
        values = np.asarray(self.values)
        values = _frozen(values, values.dtype if values.dtype.kind in "iu" else np.float64)
        object.__setattr__(self, "col_ptr", col_ptr)
        object.__setattr__(self, "row_idx", row_idx)
        object.__setattr__(self, "values", values)
        if col_ptr.shape != (self.ncols + 1,) or col_ptr[0] != 0:
            raise ValueError("col_ptr must have length ncols+1 and start at 0")
        if np.any(np.diff(col_ptr) < 0):
            raise ValueError("col_ptr must be monotone")
        nnz = int(col_ptr[-1])
        if row_idx.shape != (nnz,) or values.shape != (nnz,):
            raise ValueError("row_idx/values length must equal col_ptr[-1]")
        if nnz:
            if row_idx.min() < 0 or row_idx.max() >= self.nrows:
                raise ValueError("row index out of range")
            cols = np.repeat(np.arange(self.ncols), np.diff(col_ptr))
            same_col = cols[1:] == cols[:-1]
            if np.any(row_idx[1:][same_col] <= row_idx[:-1][same_col]):
                raise ValueError("row indices must be strictly increasing within a column")
            if self.symmetry is Symmetry.LOWER and np.any(row_idx < cols):
                raise ValueError("lower-stored matrix has entries above the diagonal")
        else:
            cols = np.zeros(0, dtype=np.int64)
        cols.setflags(write=False)
        object.__setattr__(self, "_cols", cols)
        if self.symmetry is Symmetry.LOWER and self.nrows != self.ncols:
            raise ValueError("symmetric matrix must be square")

    # -- construction ------------------------------------------------------

    @classmethod
    def from_triplets(cls, nrows, ncols, rows, cols, vals, symmetry=Symmetry.GENERAL,
                      dtype=np.float64):
        """Build from coordinates, summing duplicates."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=dtype)
        if symmetry is Symmetry.LOWER:
            # fold any upper entries onto the lower triangle
            rows, cols = np.maximum(rows, cols), np.minimum(rows, cols)
        order = np.lexsort((rows, cols))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if rows.size:
            key = cols * max(nrows, 1) + rows
            first = np.concatenate(([True], key[1:] != key[:-1]))
            starts = np.flatnonzero(first)
            vals = np.add.reduceat(vals, starts) if vals.size else vals
            rows, cols = rows[starts], cols[starts]
        col_ptr = np.zeros(ncols + 1, dtype=np.int64)
        np.add.at(col_ptr, cols + 1, 1)
        return cls(nrows, ncols, np.cumsum(col_ptr), rows, vals.astype(dtype), symmetry)

    @classmethod
    def from_dense(cls, a, symmetry=Symmetry.GENERAL, keep_zeros=False):
        a = np.asarray(a)
        if symmetry is Symmetry.LOWER:
            mask = np.tril(np.ones(a.shape, dtype=bool))
        else:
            mask = np.ones(a.shape, dtype=bool)
        if not keep_zeros:
            mask &= a != 0
        cols, rows = np.nonzero(mask.T)
        dtype = a.dtype if a.dtype.kind in "if" else np.float64
        return cls.from_triplets(a.shape[0], a.shape[1], rows, cols, a[rows, cols], symmetry, dtype)

    @classmethod
    def from_scipy(cls, m, symmetry=Symmetry.GENERAL):
        m = m.tocsc()
        m.sum_duplicates()
        m.sort_indices()
        return cls(m.shape[0], m.shape[1], m.indptr, m.indices, m.data, symmetry)

    def with_values(self, values) -> "SparseMatrix":
        """Same pattern, new numeric values."""
        return SparseMatrix(self.nrows, self.ncols, self.col_ptr, self.row_idx,
                            np.asarray(values, dtype=np.float64), self.symmetry)

    # -- inspection --------------------------------------------------------

    @property
    def shape(self):
        return (self.nrows, self.ncols)

    @property
    def nnz(self) -> int:
        return int(self.col_ptr[-1])

    @property
    def col_idx(self) -> np.ndarray:
        """Column index of every stored entry."""
        return self._cols

    def column(self, j):
        a, b = self.col_ptr[j], self.col_ptr[j + 1]
        return self.row_idx[a:b], self.values[a:b]

    def same_pattern(self, other: "SparseMatrix") -> bool:
        return (self.shape == other.shape and self.symmetry == other.symmetry
                and np.array_equal(self.col_ptr, other.col_ptr)
                and np.array_equal(self.row_idx, other.row_idx))

    def to_dense(self) -> np.ndarray:
        a = np.zeros(self.shape, dtype=np.result_type(self.values.dtype, np.float64))
        a[self.row_idx, self._cols] = self.values
        if self.symmetry is Symmetry.LOWER:
            off = self.row_idx != self._cols
            a[self._cols[off], self.row_idx[off]] = self.values[off]
        return a

    def to_scipy(self):
        import scipy.sparse as sp

        return sp.csc_matrix((self.values, self.row_idx, self.col_ptr), shape=self.shape)

    def norm_inf(self) -> float:
        if self.nnz == 0:
            return 0.0
        rows_sum = np.bincount(self.row_idx, weights=np.abs(self.values), minlength=self.nrows)
        if self.symmetry is Symmetry.LOWER:
            off = self.row_idx != self._cols
            rows_sum += np.bincount(self._cols[off], weights=np.abs(self.values[off]),
                                    minlength=self.nrows)
        return float(rows_sum.max())

    # -- products ----------------------------------------------------------

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.ncols,):
            raise DimensionMismatch(f"expected vector of length {self.ncols}, got {x.shape}")
        y = np.bincount(self.row_idx, weights=self.values * x[self._cols], minlength=self.nrows)
        if self.symmetry is Symmetry.LOWER:
            off = self.row_idx != self._cols
            y += np.bincount(self._cols[off], weights=self.values[off] * x[self.row_idx[off]],
                             minlength=self.ncols)
        return y

    def rmatvec(self, x) -> np.ndarray:
        """Compute A^T x."""
        if self.symmetry is Symmetry.LOWER:
            return self.matvec(x)
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.nrows,):
            raise DimensionMismatch(f"expected vector of length {self.nrows}, got {x.shape}")
        return np.bincount(self._cols, weights=self.values * x[self.row_idx], minlength=self.ncols)

    def __matmul__(self, x):
        return self.matvec(x)

    def transpose(self) -> "SparseMatrix":
        if self.symmetry is Symmetry.LOWER:
            return self
        return SparseMatrix.from_triplets(self.ncols, self.nrows, self._cols, self.row_idx,
                                          self.values, dtype=self.values.dtype)

    @property
    def T(self):
        return self.transpose()


def read_matrix_market(path) -> SparseMatrix:
    import scipy.io

    m = scipy.io.mmread(path)
    info = scipy.io.mminfo(path)
    if info[5] == "symmetric":
        import scipy.sparse as sp

        return SparseMatrix.from_scipy(sp.tril(m), Symmetry.LOWER)
    return SparseMatrix.from_scipy(m)


def write_matrix_market(path, a: SparseMatrix, comment=""):
    import scipy.io

    m = a.to_scipy()
    symmetry = "symmetric" if a.symmetry is Symmetry.LOWER else "general"
    field_ = "integer" if a.values.dtype.kind == "i" else "real"
    scipy.io.mmwrite(path, m, comment=comment, field=field_, symmetry=symmetry)
