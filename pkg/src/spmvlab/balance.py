"""Contiguous thread partitions of a block's rows, balanced by nonzeros.

Three schemes, in increasing quality: ``equal_rows_partition`` splits row
counts evenly (what a naive parallel-for gives you), ``greedy_partition``
cuts by cumulative nonzero targets, and ``diffuse`` refines any partition
with local one-row boundary moves. All are pure functions of their
inputs, so a partition can be computed once and cached with its matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ThreadPartition",
    "BalanceStats",
    "equal_rows_partition",
    "greedy_partition",
    "diffuse",
    "balance_stats",
]


@dataclass(frozen=True)
class ThreadPartition:
    """Contiguous row-block boundaries for a team of workers.

    ``boundaries`` has ``workers + 1`` non-decreasing entries starting at
    0 and ending at the block's row count; worker ``w`` owns rows
    ``[boundaries[w], boundaries[w + 1])``. Empty blocks are legal.
    """

    boundaries: tuple[int, ...]

    def __post_init__(self):
        b = self.boundaries
        if len(b) < 2:
            raise ValueError("partition needs at least one worker")
        if b[0] != 0:
            raise ValueError(f"boundaries must start at 0, got {b[0]}")
        if any(b[i] > b[i + 1] for i in range(len(b) - 1)):
            raise ValueError(f"boundaries not non-decreasing: {b}")

    @property
    def workers(self) -> int:
        return len(self.boundaries) - 1

    @property
    def nrows(self) -> int:
        return self.boundaries[-1]

    def rows(self, worker: int) -> tuple[int, int]:
        """Half-open local row range owned by ``worker``."""
        return self.boundaries[worker], self.boundaries[worker + 1]


@dataclass(frozen=True)
class BalanceStats:
    """Per-worker nonzero loads and the resulting imbalance ratio."""

    loads: tuple[int, ...]
    max_load: int
    mean_load: float
    imbalance: float


def equal_rows_partition(nrows: int, workers: int) -> ThreadPartition:
    """Split ``nrows`` rows as evenly as possible among ``workers``.

    The first ``nrows % workers`` workers receive one extra row.
    """
    if workers < 1:
        raise ValueError(f"worker count must be >= 1, got {workers}")
    base, extra = divmod(nrows, workers)
    bounds = [0]
    for w in range(workers):
        bounds.append(bounds[-1] + base + (1 if w < extra else 0))
    return ThreadPartition(tuple(bounds))


def greedy_partition(row_nnz, workers: int) -> ThreadPartition:
    """Cut rows by cumulative nonzero count against a moving target.

    Walks the rows accumulating nonzeros and cuts after the row where the
    running sum first reaches ``remaining_nnz / remaining_workers``,
    recomputing the target after every cut; the last worker takes
    whatever remains. The comparison is done in integer arithmetic
    (``running * remaining_workers >= remaining_nnz``) so equal-weight
    rows reproduce the equal-rows split exactly.
    """
    if workers < 1:
        raise ValueError(f"worker count must be >= 1, got {workers}")
    nnz = [int(w) for w in row_nnz]
    n = len(nnz)
    remaining = sum(nnz)
    bounds = [0]
    row = 0
    for left in range(workers, 1, -1):
        running = 0
        while row < n and running * left < remaining:
            running += nnz[row]
            row += 1
        bounds.append(row)
        remaining -= running
    bounds.append(n)
    return ThreadPartition(tuple(bounds))


def diffuse(partition: ThreadPartition, row_nnz, max_sweeps: int | None = None) -> ThreadPartition:
    """Refine a partition by local one-row boundary moves.

    Sweeps the interior boundaries in order; at each boundary the row
    just left or just right of it may hop across, and a move is accepted
    only if it strictly decreases the larger of the two adjacent loads
    (ties are rejected, which guarantees termination). Stops after a
    sweep with no accepted move, or after ``max_sweeps`` sweeps (default:
    the block's row count). The overall maximum load never increases.
    """
    nnz = [int(w) for w in row_nnz]
    n = len(nnz)
    if partition.nrows != n:
        raise ValueError(
            f"partition covers {partition.nrows} rows but {n} weights given")
    bounds = list(partition.boundaries)
    W = partition.workers
    if max_sweeps is None:
        max_sweeps = n
    prefix = [0]
    for w in nnz:
        prefix.append(prefix[-1] + w)

    def pair(k, b):
        left = prefix[b] - prefix[bounds[k - 1]]
        right = prefix[bounds[k + 1]] - prefix[b]
        return left, right

    for _ in range(max_sweeps):
        moved = False
        for k in range(1, W):
            b = bounds[k]
            left, right = pair(k, b)
            best = max(left, right)
            choice = b
            if b - 1 >= bounds[k - 1]:
                l2, r2 = pair(k, b - 1)
                if max(l2, r2) < best:
                    best = max(l2, r2)
                    choice = b - 1
            if b + 1 <= bounds[k + 1]:
                l2, r2 = pair(k, b + 1)
                if max(l2, r2) < best:
                    best = max(l2, r2)
                    choice = b + 1
            if choice != b:
                bounds[k] = choice
                moved = True
        if not moved:
            break
    return ThreadPartition(tuple(bounds))


def balance_stats(partition: ThreadPartition, row_nnz) -> BalanceStats:
    """Per-worker loads, max load, mean load, and max/mean imbalance."""
    nnz = np.asarray(row_nnz, dtype=np.int64)
    if partition.nrows != len(nnz):
        raise ValueError(
            f"partition covers {partition.nrows} rows but {len(nnz)} weights given")
    prefix = np.concatenate([[0], np.cumsum(nnz)])
    b = np.array(partition.boundaries, dtype=np.int64)
    loads = tuple(int(v) for v in (prefix[b[1:]] - prefix[b[:-1]]))
    max_load = max(loads)
    mean = sum(loads) / len(loads)
    imbalance = 1.0 if mean == 0 else max_load / mean
    return BalanceStats(loads, max_load, mean, imbalance)
