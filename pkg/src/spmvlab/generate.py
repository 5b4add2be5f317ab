"""Synthetic benchmark matrices.

``extruded_laplacian`` is the workhorse input: a 7-point stencil on an
nx * ny * layers grid, so the ``layers`` argument scales the problem
size (and nonzero count) linearly. ``arrowhead`` produces a strongly
row-skewed matrix for exercising thread-level load balancing.
"""

from __future__ import annotations

import numpy as np

from .sparse import CsrMatrix

__all__ = ["extruded_laplacian", "arrowhead"]


def extruded_laplacian(nx: int, ny: int, layers: int) -> CsrMatrix:
    """7-point Laplacian on an nx x ny x layers grid, shifted to be SPD.

    Node (i, j, k) maps to row i + nx*(j + ny*k). Every row carries a
    diagonal value of 7 (the 6-neighbor stencil plus a unit shift) and -1
    for each in-grid axis neighbor. The unit shift keeps the matrix
    strictly diagonally dominant regardless of boundary truncation, hence
    symmetric positive definite and safe for conjugate gradients.

    Raises
    ------
    ValueError
        If any dimension is < 1.
    """
    if nx < 1 or ny < 1 or layers < 1:
        raise ValueError(f"grid dimensions must be >= 1, got ({nx}, {ny}, {layers})")
    n = nx * ny * layers
    nxy = nx * ny
    offsets = np.zeros(n + 1, dtype=np.int64)
    cols = []
    vals = []
    row = 0
    for k in range(layers):
        for j in range(ny):
            for i in range(nx):
                if k > 0:
                    cols.append(row - nxy)
                    vals.append(-1.0)
                if j > 0:
                    cols.append(row - nx)
                    vals.append(-1.0)
                if i > 0:
                    cols.append(row - 1)
                    vals.append(-1.0)
                cols.append(row)
                vals.append(7.0)
                if i < nx - 1:
                    cols.append(row + 1)
                    vals.append(-1.0)
                if j < ny - 1:
                    cols.append(row + nx)
                    vals.append(-1.0)
                if k < layers - 1:
                    cols.append(row + nxy)
                    vals.append(-1.0)
                row += 1
                offsets[row] = len(cols)
    return CsrMatrix(n, n, offsets, np.array(cols, dtype=np.int64), np.array(vals))


def arrowhead(n: int) -> CsrMatrix:
    """Symmetric arrowhead matrix: dense last row/column, heavy diagonal.

    Rows 0..n-2 hold (diag, last-column) pairs; the last row is dense.
    The diagonal value n keeps it strictly diagonally dominant (SPD).
    The last row concentrates roughly half the nonzeros in one row,
    which is the worst case for equal-rows thread partitions.
    """
    if n < 1:
        raise ValueError(f"order must be >= 1, got {n}")
    if n == 1:
        return CsrMatrix(1, 1, np.array([0, 1]), np.array([0]), np.array([float(n)]))
    offsets = np.zeros(n + 1, dtype=np.int64)
    cols = []
    vals = []
    for i in range(n - 1):
        cols += [i, n - 1]
        vals += [float(n), 1.0]
        offsets[i + 1] = len(cols)
    cols += list(range(n))
    vals += [1.0] * (n - 1) + [float(n)]
    offsets[n] = len(cols)
    return CsrMatrix(n, n, offsets, np.array(cols, dtype=np.int64), np.array(vals))
