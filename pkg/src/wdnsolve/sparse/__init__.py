"""Sparse matrix kernel: CSC storage, ordering, Cholesky, Gram assembly."""

from wdnsolve.sparse.assembly import GramAssembler, assemble_ztfz
from wdnsolve.sparse.cholesky import (
    NumericFactor,
    SymbolicFactor,
    cholesky,
    numeric_cholesky,
    solve_factored,
    symbolic_cholesky,
)
from wdnsolve.sparse.csc import SparseMatrix, Symmetry, read_matrix_market, write_matrix_market
from wdnsolve.sparse.ordering import fill_reducing_order, minimum_degree, natural_order

__all__ = [
    "GramAssembler", "assemble_ztfz", "NumericFactor", "SymbolicFactor", "cholesky",
    "numeric_cholesky", "solve_factored", "symbolic_cholesky", "SparseMatrix", "Symmetry",
    "read_matrix_market", "write_matrix_market", "fill_reducing_order", "minimum_degree",
    "natural_order",
]
