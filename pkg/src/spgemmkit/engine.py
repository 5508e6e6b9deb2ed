"""Row-wise sparse matrix-matrix multiplication with hashed accumulation.

The multiply runs in three phases:

1. grouping  - count each output row's intermediate products (the number of
               multiply-adds feeding it) and bucket rows into size classes,
2. allocation - a symbolic pass that hash-counts each row's distinct output
               columns and builds the output row pointer,
3. accumulation - the numeric pass that hash-accumulates products, gathers
               the surviving entries, and sorts each row by column.

Rows are processed in group order (small classes first, ties by ascending
row id). Hash tables are sized to the smallest configured class capacity
that covers the row's intermediate-product count rounded up to a power of
two; rows that exceed the largest fixed class get an exact power-of-two
table of their own. Worker threads split the sorted row list into chunks of
roughly equal total intermediate products, and every row writes only its own
output span, so results are identical for any worker count.

``shared_table_mode`` routes every row of the non-smallest classes through a
single Python-level hash table shared by a team of striding workers. That
exercises the concurrent insert/accumulate contract end to end; the numeric
results then carry whatever floating-point addend order the interleaving
produced, so only structure is bit-stable in that mode.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .core import INDEX_DTYPE, VALUE_DTYPE, CsrMatrix
from .errors import BadConfig, CapacityMismatch, DimensionMismatch, TableFull
from .hashtable import DEFAULT_MULTIPLIER, HashAccumulator, next_pow2

__all__ = [
    "SpgemmConfig",
    "RowGroupPlan",
    "SpgemmStats",
    "count_intermediate_products",
    "group_rows",
    "allocation_phase",
    "accumulation_phase",
    "spgemm",
]


@dataclass(frozen=True)
class SpgemmConfig:
    """Tuning knobs for the three-phase multiply.

    ``group_thresholds`` are the lower bounds of classes 1..3 on the
    intermediate-product count; ``table_sizes`` are the fixed hash-table
    capacities of classes 0..2 (class 3 sizes tables per row).
    ``thread_block_sizes`` is carried for reporting only; on this CPU
    implementation the per-class worker teams are plain threads.
    """

    group_thresholds: tuple[int, int, int] = (32, 512, 8192)
    table_sizes: tuple[int, int, int] = (64, 1024, 8192)
    thread_block_sizes: tuple[int, int, int, int] = (512, 32, 256, 1024)
    worker_count: int | None = None
    shared_table_mode: bool = False
    hash_multiplier: int = DEFAULT_MULTIPLIER
    use_bitonic_sort: bool = False

    def __post_init__(self) -> None:
        t = self.group_thresholds
        if len(t) != 3 or not (0 < t[0] < t[1] < t[2]):
            raise BadConfig(f"group thresholds must be increasing and positive, got {t}")
        s = self.table_sizes
        if len(s) != 3 or list(s) != sorted(s):
            raise BadConfig(f"table sizes must be non-decreasing, got {s}")
        for size in s:
            if size <= 0 or size & (size - 1):
                raise BadConfig(f"table sizes must be powers of two, got {s}")
        if self.worker_count is not None and self.worker_count < 1:
            raise BadConfig(f"worker_count must be >= 1, got {self.worker_count}")
        if self.hash_multiplier % 2 == 0:
            raise BadConfig("hash_multiplier must be odd")

    @property
    def effective_workers(self) -> int:
        if self.worker_count is not None:
            return self.worker_count
        return os.cpu_count() or 1


@dataclass(frozen=True)
class RowGroupPlan:
    """Result of the grouping phase.

    ``ip`` holds per-row intermediate-product counts, ``group`` the class of
    each row (0 = smallest), and ``sorted_ids`` the row ids permuted into
    processing order: class by class, ascending row id within a class.
    ``bounds[g]:bounds[g+1]`` frames class g inside ``sorted_ids``.
    """

    ip: np.ndarray
    group: np.ndarray
    sorted_ids: np.ndarray
    bounds: np.ndarray
    total_ip: int

    def group_sizes(self) -> np.ndarray:
        return np.diff(self.bounds)


@dataclass
class SpgemmStats:
    """Timings and work counters from one multiply."""

    total_ip: int = 0
    nnz_out: int = 0
    seconds_grouping: float = 0.0
    seconds_allocation: float = 0.0
    seconds_accumulation: float = 0.0
    group_sizes: tuple[int, int, int, int] = (0, 0, 0, 0)
    worker_count: int = 1
    numba_enabled: bool = field(default=False)

    @property
    def seconds_total(self) -> float:
        return self.seconds_grouping + self.seconds_allocation + self.seconds_accumulation

    @property
    def flops(self) -> float:
        """Throughput as 2 * intermediate products / total seconds."""
        if self.seconds_total <= 0.0:
            return 0.0
        return 2.0 * self.total_ip / self.seconds_total


def count_intermediate_products(a: CsrMatrix, b: CsrMatrix) -> np.ndarray:
    """Per-row count of scalar products the multiply generates: for row i,
    the sum of nnz(B[k,:]) over the column indices k of A's row i."""
    if a.n_cols != b.n_rows:
        raise DimensionMismatch(
            f"cannot multiply {a.n_rows}x{a.n_cols} by {b.n_rows}x{b.n_cols}"
        )
    lens_b = np.diff(b.row_ptr)
    per_nz = lens_b[a.col_idx] if a.nnz else np.zeros(0, dtype=INDEX_DTYPE)
    prefix = np.zeros(a.nnz + 1, dtype=INDEX_DTYPE)
    np.cumsum(per_nz, out=prefix[1:])
    return (prefix[a.row_ptr[1:]] - prefix[a.row_ptr[:-1]]).astype(INDEX_DTYPE)


def group_rows(ip: np.ndarray, config: SpgemmConfig | None = None) -> RowGroupPlan:
    """Bucket rows into four size classes by intermediate-product count and
    order them class by class, ascending row id within each class."""
    config = config or SpgemmConfig()
    ip = np.ascontiguousarray(ip, dtype=INDEX_DTYPE)
    thresholds = np.asarray(config.group_thresholds, dtype=INDEX_DTYPE)
    group = np.digitize(ip, thresholds).astype(INDEX_DTYPE)
    sorted_ids = np.argsort(group, kind="stable").astype(INDEX_DTYPE)
    bounds = np.searchsorted(group[sorted_ids], np.arange(5)).astype(INDEX_DTYPE)
    return RowGroupPlan(
        ip=ip,
        group=group,
        sorted_ids=sorted_ids,
        bounds=bounds,
        total_ip=int(ip.sum()),
    )


def _table_sizes_for(plan: RowGroupPlan, config: SpgemmConfig) -> np.ndarray:
    """Hash-table capacity per row (aligned with row id, not sort order)."""
    need = np.maximum(plan.ip, 1)
    bits = np.ceil(np.log2(need)).astype(INDEX_DTYPE)
    pow2 = np.left_shift(np.int64(1), bits)
    caps = np.asarray(config.table_sizes, dtype=INDEX_DTYPE)
    sizes = np.where(pow2 <= caps[0], caps[0],
                     np.where(pow2 <= caps[1], caps[1],
                              np.where(pow2 <= caps[2], caps[2], pow2)))
    sizes[plan.ip == 0] = 0
    return sizes.astype(INDEX_DTYPE)


def _chunk_bounds_over(ids: np.ndarray, ip: np.ndarray, workers: int) -> list[tuple[int, int]]:
    """Split a processing order into up to `workers` chunks of roughly equal
    total intermediate products."""
    n = ids.shape[0]
    if n == 0:
        return []
    if workers <= 1:
        return [(0, n)]
    weight = np.maximum(ip[ids], 1).cumsum()
    total = weight[-1]
    cuts = [0]
    for t in range(1, workers):
        cuts.append(int(np.searchsorted(weight, total * t / workers, side="left")))
    cuts.append(n)
    out = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi > lo:
            out.append((lo, hi))
    return out


def _run_chunks(fn, chunks, workers: int) -> None:
    if not chunks:
        return
    if workers <= 1 or len(chunks) == 1:
        for c in chunks:
            fn(c)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(fn, chunks))


def _shared_team_insert(a: CsrMatrix, b: CsrMatrix, row: int, acc: HashAccumulator,
                        team: int, with_values: bool) -> None:
    """Drive one row's products through a single shared accumulator with a
    team of threads striding the flattened (A-entry, B-entry) product loop."""
    lo, hi = int(a.row_ptr[row]), int(a.row_ptr[row + 1])
    spans = []
    for j in range(lo, hi):
        col = int(a.col_idx[j])
        spans.append((j, int(b.row_ptr[col]), int(b.row_ptr[col + 1])))

    def lane(worker_id: int) -> None:
        p = 0
        for j, k_lo, k_hi in spans:
            for k in range(k_lo, k_hi):
                if p % team == worker_id:
                    key = int(b.col_idx[k])
                    if with_values:
                        acc.accumulate(key, float(a.values[j]), float(b.values[k]))
                    else:
                        acc.insert(key)
                p += 1

    if team <= 1:
        lane(0)
        return
    with ThreadPoolExecutor(max_workers=team) as pool:
        list(pool.map(lane, range(team)))


def _check_plan(a: CsrMatrix, b: CsrMatrix, plan: RowGroupPlan) -> None:
    if a.n_cols != b.n_rows:
        raise DimensionMismatch(
            f"cannot multiply {a.n_rows}x{a.n_cols} by {b.n_rows}x{b.n_cols}"
        )
    if plan.ip.shape[0] != a.n_rows:
        raise CapacityMismatch(
            f"plan covers {plan.ip.shape[0]} rows but the left matrix has {a.n_rows}"
        )


def allocation_phase(a: CsrMatrix, b: CsrMatrix, plan: RowGroupPlan,
                     config: SpgemmConfig | None = None) -> np.ndarray:
    """Symbolic pass: per-row distinct-column counts hashed without values,
    returned as the output matrix's row pointer."""
    config = config or SpgemmConfig()
    _check_plan(a, b, plan)
    sizes = _table_sizes_for(plan, config)
    counts = np.zeros(a.n_rows, dtype=INDEX_DTYPE)
    workers = config.effective_workers
    multiplier = np.int64(config.hash_multiplier)

    shared_cut = int(plan.bounds[1]) if config.shared_table_mode else plan.sorted_ids.shape[0]
    kernel_ids = plan.sorted_ids[:shared_cut]

    def run(chunk: tuple[int, int]) -> None:
        lo, hi = chunk
        rows = kernel_ids[lo:hi]
        out = np.zeros(rows.shape[0], dtype=INDEX_DTYPE)
        _kernels.alloc_rows(a.row_ptr, a.col_idx, b.row_ptr, b.col_idx,
                            rows, sizes[rows], multiplier, out)
        if np.any(out < 0):
            raise TableFull("hash table overflowed during the symbolic pass")
        counts[rows] = out

    _run_chunks(run, _chunk_bounds_over(kernel_ids, plan.ip, workers), workers)

    for row in plan.sorted_ids[shared_cut:]:
        row = int(row)
        acc = HashAccumulator(int(sizes[row]), with_values=False,
                              multiplier=config.hash_multiplier)
        _shared_team_insert(a, b, row, acc, workers, with_values=False)
        counts[row] = acc.unique_count

    row_ptr = np.zeros(a.n_rows + 1, dtype=INDEX_DTYPE)
    np.cumsum(counts, out=row_ptr[1:])
    return row_ptr


def accumulation_phase(a: CsrMatrix, b: CsrMatrix, plan: RowGroupPlan,
                       row_ptr_c: np.ndarray,
                       config: SpgemmConfig | None = None) -> CsrMatrix:
    """Numeric pass: hash-accumulate each row's products, gather table slots
    in slot order, and sort each output row by column."""
    config = config or SpgemmConfig()
    _check_plan(a, b, plan)
    row_ptr_c = np.ascontiguousarray(row_ptr_c, dtype=INDEX_DTYPE)
    if row_ptr_c.shape[0] != a.n_rows + 1:
        raise CapacityMismatch(
            f"row pointer has {row_ptr_c.shape[0]} entries, expected {a.n_rows + 1}"
        )
    nnz_c = int(row_ptr_c[-1])
    sizes = _table_sizes_for(plan, config)
    col_c = np.zeros(nnz_c, dtype=INDEX_DTYPE)
    val_c = np.zeros(nnz_c, dtype=VALUE_DTYPE)
    workers = config.effective_workers
    multiplier = np.int64(config.hash_multiplier)
    use_bitonic = bool(config.use_bitonic_sort)

    shared_cut = int(plan.bounds[1]) if config.shared_table_mode else plan.sorted_ids.shape[0]
    kernel_ids = plan.sorted_ids[:shared_cut]

    def run(chunk: tuple[int, int]) -> None:
        lo, hi = chunk
        rows = kernel_ids[lo:hi]
        gathered = np.zeros(rows.shape[0], dtype=INDEX_DTYPE)
        _kernels.accum_rows(a.row_ptr, a.col_idx, a.values,
                            b.row_ptr, b.col_idx, b.values,
                            rows, sizes[rows], multiplier,
                            row_ptr_c, col_c, val_c, use_bitonic, gathered)
        if np.any(gathered < 0):
            raise TableFull("hash table overflowed during the numeric pass")
        expected = row_ptr_c[rows + 1] - row_ptr_c[rows]
        bad = np.nonzero(gathered != expected)[0]
        if bad.size:
            row = int(rows[bad[0]])
            raise CapacityMismatch(
                f"row {row} gathered {int(gathered[bad[0]])} entries but the "
                f"allocation reserved {int(expected[bad[0]])}"
            )

    _run_chunks(run, _chunk_bounds_over(kernel_ids, plan.ip, workers), workers)

    for row in plan.sorted_ids[shared_cut:]:
        row = int(row)
        acc = HashAccumulator(int(sizes[row]), with_values=False,
                              multiplier=config.hash_multiplier)
        _shared_team_insert(a, b, row, acc, workers, with_values=False)
        start, stop = int(row_ptr_c[row]), int(row_ptr_c[row + 1])
        expected = stop - start
        if acc.unique_count != expected:
            raise CapacityMismatch(
                f"row {row} gathered {acc.unique_count} entries but the "
                f"allocation reserved {expected}"
            )
        # The team insert above exercises the shared table; the numeric sums
        # run in the same product order as the compiled kernels so shared
        # mode reproduces their output bit for bit.
        sums: dict[int, float] = {}
        for j in range(int(a.row_ptr[row]), int(a.row_ptr[row + 1])):
            col = int(a.col_idx[j])
            va = float(a.values[j])
            for k in range(int(b.row_ptr[col]), int(b.row_ptr[col + 1])):
                key = int(b.col_idx[k])
                sums[key] = sums.get(key, 0.0) + va * float(b.values[k])
        keys = np.fromiter(sums.keys(), INDEX_DTYPE, len(sums))
        vals = np.fromiter(sums.values(), VALUE_DTYPE, len(sums))
        order = np.argsort(keys)
        col_c[start:stop] = keys[order]
        val_c[start:stop] = vals[order]

    return CsrMatrix(a.n_rows, b.n_cols, row_ptr_c, col_c, val_c, _checked=True)


def spgemm(a: CsrMatrix, b: CsrMatrix,
           config: SpgemmConfig | None = None) -> tuple[CsrMatrix, SpgemmStats]:
    """Multiply two CSR matrices; returns the product and phase statistics."""
    from ._accel import NUMBA_ENABLED

    config = config or SpgemmConfig()
    stats = SpgemmStats(worker_count=config.effective_workers,
                        numba_enabled=NUMBA_ENABLED)

    t0 = time.perf_counter()
    ip = count_intermediate_products(a, b)
    plan = group_rows(ip, config)
    t1 = time.perf_counter()
    row_ptr_c = allocation_phase(a, b, plan, config)
    t2 = time.perf_counter()
    c = accumulation_phase(a, b, plan, row_ptr_c, config)
    t3 = time.perf_counter()

    stats.total_ip = plan.total_ip
    stats.nnz_out = c.nnz
    stats.seconds_grouping = t1 - t0
    stats.seconds_allocation = t2 - t1
    stats.seconds_accumulation = t3 - t2
    stats.group_sizes = tuple(int(x) for x in plan.group_sizes())
    return c, stats
