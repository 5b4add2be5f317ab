"""Compressed sparse row matrices and the serial multiply oracle."""

from __future__ import annotations

from dataclasses import dataclass
from math import fsum

import numpy as np

__all__ = [
    "SparseFormatError",
    "CsrMatrix",
    "validate_csr",
    "csr_from_triplets",
    "spmv_serial",
]


class SparseFormatError(ValueError):
    """Structurally invalid sparse data: bad index, bad shape, bad file."""


@dataclass(frozen=True)
class CsrMatrix:
    """Sparse matrix in compressed sparse row form.

    ``row_offsets`` has ``nrows + 1`` entries; row ``i`` occupies the slice
    ``[row_offsets[i], row_offsets[i + 1])`` of ``col_indices`` and
    ``values``. Column indices are strictly increasing within each row and
    there are no duplicate (row, col) pairs. Instances are immutable after
    construction (the arrays are marked read-only) and safe to share
    across threads.
    """

    nrows: int
    ncols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "row_offsets",
                           np.ascontiguousarray(self.row_offsets, dtype=np.int64))
        object.__setattr__(self, "col_indices",
                           np.ascontiguousarray(self.col_indices, dtype=np.int64))
        object.__setattr__(self, "values",
                           np.ascontiguousarray(self.values, dtype=np.float64))
        self.row_offsets.flags.writeable = False
        self.col_indices.flags.writeable = False
        self.values.flags.writeable = False

    @property
    def nnz(self) -> int:
        return int(self.row_offsets[-1])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    def row_nnz(self) -> np.ndarray:
        """Stored entry count of each row."""
        return np.diff(self.row_offsets)

    def diagonal(self) -> np.ndarray:
        """Main-diagonal entries as a dense vector (absent entries are 0)."""
        d = np.zeros(min(self.nrows, self.ncols))
        for i in range(len(d)):
            lo, hi = self.row_offsets[i], self.row_offsets[i + 1]
            k = np.searchsorted(self.col_indices[lo:hi], i)
            if k < hi - lo and self.col_indices[lo + k] == i:
                d[i] = self.values[lo + k]
        return d

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.nrows, self.ncols))
        for i in range(self.nrows):
            lo, hi = self.row_offsets[i], self.row_offsets[i + 1]
            out[i, self.col_indices[lo:hi]] = self.values[lo:hi]
        return out

    def triplets(self) -> list[tuple[int, int, float]]:
        """Stored entries as (row, col, value), in row-major storage order."""
        rows = np.repeat(np.arange(self.nrows), self.row_nnz())
        return list(zip(rows.tolist(), self.col_indices.tolist(), self.values.tolist()))

    def __repr__(self):
        return f"CsrMatrix({self.nrows}x{self.ncols}, nnz={self.nnz})"


def validate_csr(A: CsrMatrix) -> None:
    """Check all CSR structural invariants, raising SparseFormatError.

    Verifies offset monotonicity, column bounds, strict per-row column
    ordering (which also rules out duplicates), and finite values.
    """
    offs = A.row_offsets
    if len(offs) != A.nrows + 1:
        raise SparseFormatError(
            f"row_offsets has {len(offs)} entries, expected nrows+1={A.nrows + 1}")
    if A.nrows < 0 or A.ncols < 0:
        raise SparseFormatError(f"negative dimension {A.nrows}x{A.ncols}")
    if offs[0] != 0:
        raise SparseFormatError(f"row_offsets[0] = {offs[0]}, expected 0")
    if np.any(np.diff(offs) < 0):
        raise SparseFormatError("row_offsets not non-decreasing")
    nnz = int(offs[-1])
    if len(A.col_indices) != nnz or len(A.values) != nnz:
        raise SparseFormatError(
            f"index/value arrays sized {len(A.col_indices)}/{len(A.values)}, "
            f"expected nnz={nnz}")
    if nnz and (A.col_indices.min() < 0 or A.col_indices.max() >= A.ncols):
        bad = np.flatnonzero((A.col_indices < 0) | (A.col_indices >= A.ncols))[0]
        raise SparseFormatError(
            f"column index {A.col_indices[bad]} out of range [0, {A.ncols})")
    for i in range(A.nrows):
        row = A.col_indices[offs[i]:offs[i + 1]]
        if len(row) > 1 and np.any(np.diff(row) <= 0):
            raise SparseFormatError(
                f"row {i}: column indices not strictly increasing")
    if nnz and not np.all(np.isfinite(A.values)):
        bad = np.flatnonzero(~np.isfinite(A.values))[0]
        raise SparseFormatError(f"non-finite value at storage position {bad}")


def csr_from_triplets(entries, nrows: int, ncols: int) -> CsrMatrix:
    """Assemble a canonical CSR matrix from (row, col, value) triplets.

    Duplicate (row, col) pairs are summed. Entries whose summed value is
    exactly zero are retained as explicit stored zeros. Rows come out
    sorted by column.

    Raises
    ------
    SparseFormatError
        If any triplet's row or column index falls outside the declared
        shape; the message names the offending entry.
    """
    entries = list(entries)
    if not entries:
        return CsrMatrix(nrows, ncols, np.zeros(nrows + 1, dtype=np.int64),
                         np.empty(0, dtype=np.int64), np.empty(0))
    r = np.array([e[0] for e in entries], dtype=np.int64)
    c = np.array([e[1] for e in entries], dtype=np.int64)
    v = np.array([e[2] for e in entries], dtype=np.float64)
    bad = np.flatnonzero((r < 0) | (r >= nrows) | (c < 0) | (c >= ncols))
    if len(bad):
        k = int(bad[0])
        raise SparseFormatError(
            f"entry ({r[k]}, {c[k]}, {v[k]}) out of range for a "
            f"{nrows}x{ncols} matrix")
    order = np.lexsort((c, r))
    r, c, v = r[order], c[order], v[order]
    first = np.ones(len(r), dtype=bool)
    first[1:] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
    starts = np.flatnonzero(first)
    vals = np.add.reduceat(v, starts)
    rows, cols = r[starts], c[starts]
    offsets = np.zeros(nrows + 1, dtype=np.int64)
    np.add.at(offsets, rows + 1, 1)
    np.cumsum(offsets, out=offsets)
    A = CsrMatrix(nrows, ncols, offsets, cols, vals)
    validate_csr(A)
    return A


def spmv_serial(A: CsrMatrix, x: np.ndarray) -> np.ndarray:
    """Serial sparse matrix-vector multiply, y = A x.

    Rows are processed in order; each output entry is the correctly
    rounded sum of that row's products ``A[i, j] * x[j]`` taken over the
    stored (ascending-column) entries. Correct rounding makes each entry
    independent of how row entries might be grouped, so this routine is
    the reference every parallel execution model must match bit for bit.

    Raises
    ------
    ValueError
        If ``len(x) != A.ncols``.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (A.ncols,):
        raise ValueError(f"vector length {x.shape} does not match ncols={A.ncols}")
    prods = (A.values * x[A.col_indices]).tolist()
    offs = A.row_offsets.tolist()
    y = np.empty(A.nrows)
    for i in range(A.nrows):
        y[i] = fsum(prods[offs[i]:offs[i + 1]])
    return y
