"""Matrix Market coordinate-format reader and writer.

Supports ``real`` and ``integer`` fields with ``general`` or ``symmetric``
symmetry. Symmetric inputs are expanded to full storage on read. Values
are written with ``repr`` so that write -> read reproduces the exact CSR
arrays, bit for bit.
"""

from __future__ import annotations

import io
import os

from .sparse import CsrMatrix, SparseFormatError, csr_from_triplets

__all__ = ["read_matrix_market", "write_matrix_market"]

_BANNER = "%%MatrixMarket"


def _open_lines(source):
    if isinstance(source, (str, os.PathLike)):
        return open(source, "r", encoding="ascii"), True
    return source, False


def read_matrix_market(source) -> CsrMatrix:
    """Parse a Matrix Market coordinate file into a CsrMatrix.

    ``source`` may be a path or an open text stream. One-based indices are
    converted to zero-based; for ``symmetric`` files every off-diagonal
    entry (i, j) is mirrored to (j, i).

    Raises
    ------
    SparseFormatError
        On a malformed or unsupported header, an index outside the
        declared bounds, or an entry count that disagrees with the size
        line.
    """
    stream, owned = _open_lines(source)
    try:
        header = stream.readline()
        parts = header.split()
        if len(parts) != 5 or parts[0] != _BANNER:
            raise SparseFormatError(f"malformed header line: {header.strip()!r}")
        obj, fmt, field, symmetry = (p.lower() for p in parts[1:])
        if obj != "matrix" or fmt != "coordinate":
            raise SparseFormatError(
                f"unsupported object/format {obj!r}/{fmt!r}; "
                "only 'matrix coordinate' is handled")
        if field not in ("real", "integer"):
            raise SparseFormatError(f"unsupported field {field!r}")
        if symmetry not in ("general", "symmetric"):
            raise SparseFormatError(f"unsupported symmetry {symmetry!r}")

        size_line = None
        for line in stream:
            s = line.strip()
            if not s or s.startswith("%"):
                continue
            size_line = s
            break
        if size_line is None:
            raise SparseFormatError("missing size line")
        try:
            nrows, ncols, nnz = (int(t) for t in size_line.split())
        except ValueError:
            raise SparseFormatError(f"malformed size line: {size_line!r}") from None
        if nrows < 0 or ncols < 0 or nnz < 0:
            raise SparseFormatError(f"negative size declaration: {size_line!r}")

        triplets = []
        count = 0
        for line in stream:
            s = line.strip()
            if not s:
                continue
            count += 1
            tokens = s.split()
            if len(tokens) != 3:
                raise SparseFormatError(f"malformed entry line: {s!r}")
            try:
                i, j = int(tokens[0]), int(tokens[1])
                v = float(tokens[2]) if field == "real" else float(int(tokens[2]))
            except ValueError:
                raise SparseFormatError(f"malformed entry line: {s!r}") from None
            if not (1 <= i <= nrows and 1 <= j <= ncols):
                raise SparseFormatError(
                    f"entry ({i}, {j}) outside declared {nrows}x{ncols} bounds")
            triplets.append((i - 1, j - 1, v))
            if symmetry == "symmetric" and i != j:
                triplets.append((j - 1, i - 1, v))
        if count != nnz:
            raise SparseFormatError(
                f"size line declares {nnz} entries but file contains {count}")
        return csr_from_triplets(triplets, nrows, ncols)
    finally:
        if owned:
            stream.close()


def write_matrix_market(A: CsrMatrix) -> str:
    """Render a CsrMatrix as Matrix Market coordinate/general text."""
    out = io.StringIO()
    out.write(f"{_BANNER} matrix coordinate real general\n")
    out.write(f"{A.nrows} {A.ncols} {A.nnz}\n")
    offs = A.row_offsets.tolist()
    cols = A.col_indices.tolist()
    vals = A.values.tolist()
    for i in range(A.nrows):
        for k in range(offs[i], offs[i + 1]):
            out.write(f"{i + 1} {cols[k] + 1} {vals[k]!r}\n")
    return out.getvalue()
