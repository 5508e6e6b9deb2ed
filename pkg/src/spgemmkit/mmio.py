"""Matrix Market coordinate I/O plus a binary CSR cache format.

Reads the SuiteSparse flavour of the format: banner
``%%MatrixMarket matrix coordinate <field> <symmetry>``, ``%`` comments,
a ``rows cols nnz`` size line, then 1-based entries. Pattern entries get
value 1.0; symmetric files are expanded to full storage by mirroring
strictly-lower (and strictly-upper) off-diagonal entries.

The cache format is a little-endian file: magic ``CSR1``, three u64 counts
(n_rows, n_cols, nnz), then row_ptr (int64), col_idx (int64), values
(float64). It exists so repeatedly benchmarked matrices skip the text parse.
"""

import io

import numpy as np

from .core import INDEX_DTYPE, VALUE_DTYPE, CsrMatrix, csr_from_arrays
from .errors import ParseError, UnsupportedFormat

_MAGIC = b"CSR1"


def _read_banner(line):
    parts = line.strip().split()
    if len(parts) != 5 or parts[0] != "%%MatrixMarket" or parts[1].lower() != "matrix":
        raise ParseError(f"bad Matrix Market banner: {line.strip()!r}")
    layout, field, symmetry = (p.lower() for p in parts[2:5])
    if layout != "coordinate":
        raise UnsupportedFormat(f"unsupported layout {layout!r} (only coordinate)")
    if field not in ("real", "integer", "pattern"):
        raise UnsupportedFormat(f"unsupported field {field!r}")
    if symmetry not in ("general", "symmetric"):
        raise UnsupportedFormat(f"unsupported symmetry {symmetry!r}")
    return field, symmetry


def load_matrix_market(path, symmetrize=False):
    """Parse a .mtx file into canonical CSR.

    ``symmetrize=True`` mirrors off-diagonal entries of *general* files too
    (graph inputs stored as directed edge lists); symmetric-banner files are
    always expanded. Mirrored duplicates collapse by summation.
    """
    with open(path, "rb") as fh:
        first = fh.readline().decode("ascii", "replace")
        field, symmetry = _read_banner(first)
        size_line = fh.readline().decode("ascii", "replace")
        while size_line and size_line.lstrip().startswith("%"):
            size_line = fh.readline().decode("ascii", "replace")
        parts = size_line.split()
        if len(parts) != 3:
            raise ParseError(f"bad size line: {size_line.strip()!r}")
        try:
            n_rows, n_cols, nnz = (int(p) for p in parts)
        except ValueError as exc:
            raise ParseError(f"bad size line: {size_line.strip()!r}") from exc

        want_cols = 2 if field == "pattern" else 3
        if nnz == 0:
            data = np.empty((0, want_cols))
        else:
            try:
                data = np.loadtxt(fh, dtype=np.float64, comments="%", ndmin=2)
            except ValueError as exc:
                raise ParseError(f"malformed entry block in {path}: {exc}") from exc
    if data.size == 0:
        data = np.empty((0, want_cols))
    if data.shape[1] < want_cols:
        raise ParseError(f"entries have {data.shape[1]} columns, expected {want_cols}")
    if data.shape[0] != nnz:
        raise ParseError(f"size line promises {nnz} entries, file holds {data.shape[0]}")
    rows = data[:, 0].astype(INDEX_DTYPE) - 1
    cols = data[:, 1].astype(INDEX_DTYPE) - 1
    if field == "pattern":
        vals = np.ones(rows.shape[0], dtype=VALUE_DTYPE)
    else:
        vals = data[:, 2].astype(VALUE_DTYPE)
    if rows.size and (rows.min() < 0 or cols.min() < 0 or
                      rows.max() >= n_rows or cols.max() >= n_cols):
        raise ParseError("entry index outside the size-line dimensions")

    if symmetry == "symmetric" or symmetrize:
        off = rows != cols
        rows, cols, vals = (np.concatenate([rows, cols[off]]),
                            np.concatenate([cols, rows[off]]),
                            np.concatenate([vals, vals[off]]))
    return csr_from_arrays(n_rows, n_cols, rows, cols, vals, dup_policy="sum")


def save_matrix_market(path, matrix, comment=None):
    """Write canonical CSR as a general real coordinate file."""
    rows, cols, vals = matrix.to_triplets()
    with open(path, "w", encoding="ascii") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        if comment:
            for line in comment.splitlines():
                fh.write(f"% {line}\n")
        fh.write(f"{matrix.n_rows} {matrix.n_cols} {matrix.nnz}\n")
        buf = io.StringIO()
        for r, c, v in zip(rows + 1, cols + 1, vals):
            buf.write(f"{r} {c} {v:.17g}\n")
        fh.write(buf.getvalue())


def save_csr_cache(path, matrix):
    header = np.array([matrix.n_rows, matrix.n_cols, matrix.nnz], dtype="<u8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(header.tobytes())
        fh.write(np.asarray(matrix.row_ptr, dtype="<i8").tobytes())
        fh.write(np.asarray(matrix.col_idx, dtype="<i8").tobytes())
        fh.write(np.asarray(matrix.values, dtype="<f8").tobytes())


def load_csr_cache(path):
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ParseError(f"{path} is not a CSR cache file")
        n_rows, n_cols, nnz = np.frombuffer(fh.read(24), dtype="<u8")
        row_ptr = np.frombuffer(fh.read(8 * (int(n_rows) + 1)), dtype="<i8")
        col_idx = np.frombuffer(fh.read(8 * int(nnz)), dtype="<i8")
        values = np.frombuffer(fh.read(8 * int(nnz)), dtype="<f8")
        if row_ptr.shape[0] != int(n_rows) + 1 or values.shape[0] != int(nnz):
            raise ParseError(f"{path} is truncated")
    return CsrMatrix(int(n_rows), int(n_cols), row_ptr, col_idx, values, _checked=True)
