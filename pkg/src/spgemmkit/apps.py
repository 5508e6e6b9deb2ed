"""Graph workloads built on the multiply engine: Markov-style flow
clustering and label-driven graph contraction.

The clustering loop alternates expansion (a matrix power computed with the
sparse multiply engine), column pruning, entrywise inflation, and column
normalization until the iterate stops changing; clusters are the connected
components of the converged flow's symmetrized support. Contraction forms
C = S * G * S^T from a one-hot selector built from 1-based node labels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (INDEX_DTYPE, VALUE_DTYPE, CsrMatrix, csr_from_arrays,
                   max_abs_diff, transpose)
from .engine import SpgemmConfig, spgemm
from .errors import LabelOutOfRange, NegativeEntry, NotSquare, SpgemmKitError

__all__ = [
    "MclParams",
    "ClusterAssignment",
    "LabelVector",
    "column_normalize",
    "prune_columns",
    "inflate",
    "add_self_loops",
    "mcl",
    "build_selector",
    "graph_contract",
    "connected_components",
]

STOCHASTIC_TOL = 1e-9


@dataclass(frozen=True)
class MclParams:
    """Knobs of the clustering loop; defaults are the conventional ones and
    every field is overridable from the command line."""

    e: int = 2
    r: float = 2.0
    theta: float = 1e-4
    k: int | None = None
    max_iter: int = 100
    eps: float = 1e-6

    def __post_init__(self) -> None:
        if self.e < 2:
            raise SpgemmKitError(f"expansion exponent must be >= 2, got {self.e}")
        if self.r <= 1:
            raise SpgemmKitError(f"inflation exponent must be > 1, got {self.r}")
        if self.theta < 0:
            raise SpgemmKitError(f"pruning threshold must be >= 0, got {self.theta}")
        if self.k is not None and self.k < 1:
            raise SpgemmKitError(f"top-k must be >= 1, got {self.k}")
        if self.max_iter < 1:
            raise SpgemmKitError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.eps <= 0:
            raise SpgemmKitError(f"eps must be > 0, got {self.eps}")


@dataclass(frozen=True)
class ClusterAssignment:
    """Dense cluster ids, one per node, numbered by first appearance."""

    cluster_of_node: np.ndarray
    n_clusters: int

    def __post_init__(self) -> None:
        ids = np.asarray(self.cluster_of_node)
        if ids.size:
            present = np.unique(ids)
            if present[0] != 0 or present[-1] != self.n_clusters - 1 or \
                    present.size != self.n_clusters:
                raise SpgemmKitError("cluster ids must be dense in [0, n_clusters)")
        elif self.n_clusters != 0:
            raise SpgemmKitError("empty assignment must have zero clusters")


@dataclass(frozen=True)
class LabelVector:
    """1-based node labels; m is the number of coarse nodes (max label)."""

    labels: np.ndarray

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels)
        if labels.size and not np.issubdtype(labels.dtype, np.integer):
            raise LabelOutOfRange("labels must be integers")
        if labels.size and int(labels.min()) < 1:
            raise LabelOutOfRange("labels must be >= 1")
        object.__setattr__(self, "labels", labels.astype(INDEX_DTYPE))

    @property
    def m(self) -> int:
        return int(self.labels.max()) if self.labels.size else 0

    def __len__(self) -> int:
        return int(self.labels.shape[0])


def _require_nonnegative(m: CsrMatrix, who: str) -> None:
    if m.nnz and float(m.values.min()) < 0.0:
        raise NegativeEntry(f"{who} requires non-negative values")


def _column_sums(m: CsrMatrix) -> np.ndarray:
    return np.bincount(m.col_idx, weights=m.values, minlength=m.n_cols)


def column_normalize(m: CsrMatrix) -> CsrMatrix:
    """Scale every nonzero column to sum to 1; columns summing to zero are
    left unchanged."""
    _require_nonnegative(m, "column_normalize")
    sums = _column_sums(m)
    denom = sums[m.col_idx] if m.nnz else np.zeros(0, dtype=VALUE_DTYPE)
    safe = np.where(denom > 0.0, denom, 1.0)
    values = m.values / safe
    return CsrMatrix(m.n_rows, m.n_cols, m.row_ptr, m.col_idx, values, _checked=True)


def prune_columns(m: CsrMatrix, theta: float, k: int | None = None) -> CsrMatrix:
    """Drop entries strictly below theta, then keep only each column's k
    largest survivors (ties keep the smaller row index)."""
    _require_nonnegative(m, "prune_columns")
    if m.nnz == 0:
        return m
    rows = np.repeat(np.arange(m.n_rows, dtype=INDEX_DTYPE), m.row_lengths())
    keep = m.values >= theta
    rows, cols, vals = rows[keep], m.col_idx[keep], m.values[keep]
    if k is not None and rows.size:
        order = np.lexsort((rows, -vals, cols))
        rows, cols, vals = rows[order], cols[order], vals[order]
        col_start = np.zeros(rows.size, dtype=bool)
        col_start[0] = True
        col_start[1:] = cols[1:] != cols[:-1]
        start_pos = np.nonzero(col_start)[0]
        rank = np.arange(rows.size, dtype=INDEX_DTYPE) - np.repeat(
            start_pos, np.diff(np.concatenate((start_pos, [rows.size]))))
        top = rank < k
        rows, cols, vals = rows[top], cols[top], vals[top]
    return csr_from_arrays(m.n_rows, m.n_cols, rows, cols, vals)


def inflate(m: CsrMatrix, r: float) -> CsrMatrix:
    """Raise every stored value to the power r; structure is unchanged."""
    values = np.power(m.values, r)
    return CsrMatrix(m.n_rows, m.n_cols, m.row_ptr, m.col_idx, values, _checked=True)


def add_self_loops(g: CsrMatrix, weight: float = 1.0) -> CsrMatrix:
    """Insert a diagonal entry of the given weight wherever one is absent;
    existing diagonal entries are kept as-is."""
    if g.n_rows != g.n_cols:
        raise NotSquare(f"expected a square matrix, got {g.n_rows}x{g.n_cols}")
    n = g.n_rows
    rows = np.repeat(np.arange(n, dtype=INDEX_DTYPE), g.row_lengths())
    has_diag = np.zeros(n, dtype=bool)
    if g.nnz:
        on_diag = rows == g.col_idx
        has_diag[rows[on_diag]] = True
    missing = np.nonzero(~has_diag)[0].astype(INDEX_DTYPE)
    all_rows = np.concatenate((rows, missing))
    all_cols = np.concatenate((g.col_idx, missing))
    all_vals = np.concatenate((g.values, np.full(missing.size, weight, dtype=VALUE_DTYPE)))
    return csr_from_arrays(n, n, all_rows, all_cols, all_vals)


def _assert_column_stochastic(m: CsrMatrix) -> None:
    sums = _column_sums(m)
    occupied = np.bincount(m.col_idx, minlength=m.n_cols) > 0
    if occupied.any():
        worst = float(np.abs(sums[occupied] - 1.0).max())
        if worst > STOCHASTIC_TOL:
            raise SpgemmKitError(
                f"normalize left a column sum off by {worst:.3e} (> {STOCHASTIC_TOL})")


def connected_components(m: CsrMatrix) -> ClusterAssignment:
    """Connected components of the symmetrized support of m, numbered by
    smallest contained node id."""
    if m.n_rows != m.n_cols:
        raise NotSquare(f"expected a square matrix, got {m.n_rows}x{m.n_cols}")
    n = m.n_rows
    rows = np.repeat(np.arange(n, dtype=INDEX_DTYPE), m.row_lengths())
    sym = csr_from_arrays(
        n, n,
        np.concatenate((rows, m.col_idx)),
        np.concatenate((m.col_idx, rows)),
        np.ones(2 * m.nnz, dtype=VALUE_DTYPE),
        dup_policy="sum",
    )
    comp = np.full(n, -1, dtype=INDEX_DTYPE)
    next_id = 0
    for seed in range(n):
        if comp[seed] >= 0:
            continue
        comp[seed] = next_id
        stack = [seed]
        while stack:
            u = stack.pop()
            for v in sym.col_idx[sym.row_ptr[u]:sym.row_ptr[u + 1]]:
                v = int(v)
                if comp[v] < 0:
                    comp[v] = next_id
                    stack.append(v)
        next_id += 1
    return ClusterAssignment(cluster_of_node=comp, n_clusters=next_id)


def mcl(g: CsrMatrix, params: MclParams | None = None,
        config: SpgemmConfig | None = None) -> tuple[ClusterAssignment, int]:
    """Flow-based clustering: add self-loops, column-normalize, then iterate
    expand (matrix power e) -> prune -> inflate -> normalize until the
    iterate moves less than eps or max_iter is reached. Clusters are the
    connected components of the converged iterate's symmetrized support.
    Returns (assignment, iterations run)."""
    params = params or MclParams()
    if g.n_rows != g.n_cols:
        raise NotSquare(f"expected a square matrix, got {g.n_rows}x{g.n_cols}")
    _require_nonnegative(g, "mcl")

    a = column_normalize(add_self_loops(g))
    iterations = 0
    for _ in range(params.max_iter):
        b = a
        for _step in range(params.e - 1):
            b, _ = spgemm(b, a, config)
        c = prune_columns(b, params.theta, params.k)
        c = inflate(c, params.r)
        c = column_normalize(c)
        _assert_column_stochastic(c)
        iterations += 1
        delta = max_abs_diff(c, a)
        a = c
        if delta < params.eps:
            break
    return connected_components(a), iterations


def _as_label_vector(labels) -> LabelVector:
    if isinstance(labels, LabelVector):
        return labels
    return LabelVector(np.asarray(labels))


def build_selector(labels, n: int) -> CsrMatrix:
    """One-hot m x n selector S with S[labels[j]-1, j] = 1 for every node j."""
    lv = _as_label_vector(labels)
    if len(lv) != n:
        raise LabelOutOfRange(f"got {len(lv)} labels for {n} nodes")
    m = lv.m
    cols = np.arange(n, dtype=INDEX_DTYPE)
    rows = lv.labels - 1
    vals = np.ones(n, dtype=VALUE_DTYPE)
    return csr_from_arrays(m, n, rows, cols, vals)


def graph_contract(g: CsrMatrix, labels,
                   config: SpgemmConfig | None = None) -> CsrMatrix:
    """Coarsen g by labels: C = S * g * S^T via two engine multiplies.
    Total entry mass is conserved."""
    if g.n_rows != g.n_cols:
        raise NotSquare(f"expected a square matrix, got {g.n_rows}x{g.n_cols}")
    s = build_selector(labels, g.n_rows)
    sg, _ = spgemm(s, g, config)
    c, _ = spgemm(sg, transpose(s), config)
    return c
