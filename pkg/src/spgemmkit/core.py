"""CSR matrices: construction, validation, transpose, and a reference SpGEMM.

``CsrMatrix`` is the universal operand of the kit. It is immutable after
construction (arrays are set read-only) and therefore safe to share across
worker threads. Canonical form means: monotone row_ptr starting at 0,
column indices strictly increasing inside every row, no duplicate (row, col)
pairs. Entries whose value is exactly 0.0 are legal stored entries
("structural zeros"): the multi-phase engine counts column keys without
looking at values, and the reference product here keeps the same rule so
the two routes agree on structure.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, DuplicateEntry, IndexOutOfRange

INDEX_DTYPE = np.int64
VALUE_DTYPE = np.float64


@dataclass(frozen=True)
class Triplet:
    row: int
    col: int
    value: float


@dataclass(frozen=True)
class CsrMatrix:
    n_rows: int
    n_cols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray
    _checked: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "row_ptr", _as_locked(self.row_ptr, INDEX_DTYPE))
        object.__setattr__(self, "col_idx", _as_locked(self.col_idx, INDEX_DTYPE))
        object.__setattr__(self, "values", _as_locked(self.values, VALUE_DTYPE))
        if not self._checked:
            problems = validate(self)
            if problems:
                raise IndexOutOfRange("invalid CSR: " + "; ".join(problems[:5]))

    @property
    def nnz(self):
        return int(self.row_ptr[-1])

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)

    def row_lengths(self):
        return np.diff(self.row_ptr)

    def row_slice(self, i):
        lo, hi = self.row_ptr[i], self.row_ptr[i + 1]
        return self.col_idx[lo:hi], self.values[lo:hi]

    def to_triplets(self):
        """Expand back to (row, col, value) arrays in row-major order."""
        rows = np.repeat(np.arange(self.n_rows, dtype=INDEX_DTYPE), self.row_lengths())
        return rows, self.col_idx.copy(), self.values.copy()

    def to_dense(self):
        out = np.zeros((self.n_rows, self.n_cols), dtype=VALUE_DTYPE)
        rows, cols, vals = self.to_triplets()
        out[rows, cols] = vals
        return out


def _as_locked(arr, dtype):
    arr = np.ascontiguousarray(arr, dtype=dtype)
    arr.setflags(write=False)
    return arr


def validate(a):
    """Check every CSR invariant; returns a list of human-readable violations.

    Violations are data, not errors: an empty list means the matrix is
    canonical.
    """
    problems = []
    rp, ci = np.asarray(a.row_ptr), np.asarray(a.col_idx)
    if rp.ndim != 1 or rp.shape[0] != a.n_rows + 1:
        problems.append(f"row_ptr length {rp.shape} != n_rows+1 ({a.n_rows + 1})")
        return problems
    if a.n_rows < 0 or a.n_cols < 0:
        problems.append("negative dimension")
    if rp[0] != 0:
        problems.append(f"row_ptr[0] = {rp[0]} != 0")
    drops = np.nonzero(np.diff(rp) < 0)[0]
    for i in drops[:8]:
        problems.append(f"non-monotone row_ptr at {i + 1}")
    if drops.size:
        return problems
    nnz = int(rp[-1])
    if ci.shape[0] != nnz or np.asarray(a.values).shape[0] != nnz:
        problems.append(f"array lengths {ci.shape[0]}/{np.asarray(a.values).shape[0]} != nnz {nnz}")
        return problems
    if nnz and (ci.min() < 0 or ci.max() >= a.n_cols):
        problems.append("index out of range")
    if nnz > 1:
        # within-row ordering, vectorized: ignore diffs that cross a row start
        row_start = np.zeros(nnz, dtype=bool)
        interior = rp[1:-1]
        row_start[interior[interior < nnz]] = True
        d = np.diff(ci)
        bad = np.nonzero((d <= 0) & ~row_start[1:])[0]
        for p in bad[:8]:
            i = int(np.searchsorted(rp, p + 1, side="right") - 1)
            kind = "duplicate column" if d[p] == 0 else "columns not ascending"
            problems.append(f"{kind} in row {i}")
    return problems


def csr_from_arrays(n_rows, n_cols, rows, cols, vals, dup_policy="sum"):
    """Build a canonical CsrMatrix from parallel coordinate arrays."""
    rows = np.asarray(rows, dtype=INDEX_DTYPE)
    cols = np.asarray(cols, dtype=INDEX_DTYPE)
    vals = np.asarray(vals, dtype=VALUE_DTYPE)
    if rows.size:
        if rows.min() < 0 or rows.max() >= n_rows:
            raise IndexOutOfRange(f"row index outside [0, {n_rows})")
        if cols.min() < 0 or cols.max() >= n_cols:
            raise IndexOutOfRange(f"column index outside [0, {n_cols})")
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    if rows.size:
        dup = (np.diff(rows) == 0) & (np.diff(cols) == 0)
        if dup.any():
            if dup_policy == "error":
                k = int(np.nonzero(dup)[0][0])
                raise DuplicateEntry(f"duplicate entry at ({rows[k]}, {cols[k]})")
            # sum duplicates: reduce over runs of equal (row, col)
            head = np.concatenate(([True], ~dup))
            starts = np.nonzero(head)[0]
            vals = np.add.reduceat(vals, starts)
            rows, cols = rows[starts], cols[starts]
    row_ptr = np.zeros(n_rows + 1, dtype=INDEX_DTYPE)
    np.add.at(row_ptr, rows + 1, 1)
    np.cumsum(row_ptr, out=row_ptr)
    return CsrMatrix(n_rows, n_cols, row_ptr, cols, vals, _checked=True)


def csr_from_triplets(n_rows, n_cols, entries, dup_policy="sum"):
    """Canonical CSR from an iterable of Triplet (or (row, col, value) tuples).

    Deterministic regardless of input order; duplicates are summed or
    rejected per ``dup_policy`` ("sum" | "error").
    """
    if dup_policy not in ("sum", "error"):
        raise ValueError(f"unknown dup_policy {dup_policy!r}")
    entries = list(entries)
    if not entries:
        return csr_from_arrays(n_rows, n_cols, [], [], [], dup_policy)
    rows = [e.row if hasattr(e, "row") else e[0] for e in entries]
    cols = [e.col if hasattr(e, "col") else e[1] for e in entries]
    vals = [e.value if hasattr(e, "value") else e[2] for e in entries]
    return csr_from_arrays(n_rows, n_cols, rows, cols, vals, dup_policy)


def csr_from_dense(dense, keep=None):
    """CSR from a dense array. ``keep`` (boolean mask) forces entries to be
    stored even when their value is 0.0."""
    dense = np.asarray(dense, dtype=VALUE_DTYPE)
    mask = (dense != 0.0) if keep is None else np.asarray(keep, dtype=bool)
    rows, cols = np.nonzero(mask)
    return csr_from_arrays(dense.shape[0], dense.shape[1], rows, cols, dense[rows, cols])


def identity(n):
    idx = np.arange(n, dtype=INDEX_DTYPE)
    return CsrMatrix(n, n, np.arange(n + 1, dtype=INDEX_DTYPE), idx,
                     np.ones(n, dtype=VALUE_DTYPE), _checked=True)


def transpose(a):
    """Exact transpose in canonical form; transpose(transpose(A)) == A bit-for-bit."""
    rows, cols, vals = a.to_triplets()
    order = np.lexsort((rows, cols))  # sort by (col, row): rows of the transpose
    return csr_from_arrays(a.n_cols, a.n_rows, cols[order], rows[order], vals[order])


def oracle_spgemm(a, b):
    """Reference product by sorted-merge accumulation, independent of the
    hash-based engine.

    Every scalar product A[i,k]*B[k,j] is materialized, the (row, col) pairs
    are sorted, and runs are summed left-to-right, i.e. per-row accumulation
    in ascending column order. Column keys are kept even when the sum
    cancels to exactly 0.0.
    """
    if a.n_cols != b.n_rows:
        raise DimensionMismatch(f"inner dimensions differ: {a.n_cols} vs {b.n_rows}")
    lens = b.row_lengths()[a.col_idx]
    total = int(lens.sum())
    if total == 0:
        return CsrMatrix(a.n_rows, b.n_cols, np.zeros(a.n_rows + 1, INDEX_DTYPE),
                         np.empty(0, INDEX_DTYPE), np.empty(0, VALUE_DTYPE), _checked=True)
    a_rows = np.repeat(np.arange(a.n_rows, dtype=INDEX_DTYPE), a.row_lengths())
    out_rows = np.repeat(a_rows, lens)
    starts = np.asarray(b.row_ptr)[a.col_idx]
    span_base = np.concatenate(([0], np.cumsum(lens)))
    gather = np.repeat(starts - span_base[:-1], lens) + np.arange(total, dtype=INDEX_DTYPE)
    out_cols = b.col_idx[gather]
    out_vals = np.repeat(a.values, lens) * b.values[gather]

    order = np.lexsort((out_cols, out_rows))
    out_rows, out_cols, out_vals = out_rows[order], out_cols[order], out_vals[order]
    new = np.concatenate(([True], (np.diff(out_rows) != 0) | (np.diff(out_cols) != 0)))
    starts = np.nonzero(new)[0]
    summed = np.add.reduceat(out_vals, starts)
    rows, cols = out_rows[starts], out_cols[starts]
    row_ptr = np.zeros(a.n_rows + 1, dtype=INDEX_DTYPE)
    np.add.at(row_ptr, rows + 1, 1)
    np.cumsum(row_ptr, out=row_ptr)
    return CsrMatrix(a.n_rows, b.n_cols, row_ptr, cols, summed, _checked=True)


def max_abs_diff(a, b):
    """max |A - B| over the union support of two same-shape CSR matrices."""
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    ra, ca, va = a.to_triplets()
    rb, cb, vb = b.to_triplets()
    ka = ra * a.n_cols + ca
    kb = rb * b.n_cols + cb
    union = np.union1d(ka, kb)
    da = np.zeros(union.size, dtype=VALUE_DTYPE)
    db = np.zeros(union.size, dtype=VALUE_DTYPE)
    da[np.searchsorted(union, ka)] = va
    db[np.searchsorted(union, kb)] = vb
    return float(np.abs(da - db).max()) if union.size else 0.0
