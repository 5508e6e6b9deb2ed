"""Simulated ranged-indirect memory engine with a cache-replay model.

A ranged-indirect request ``(dst, n, r, a, b)`` asks for ``r`` consecutive
elements of array ``a`` starting at ``a[b[i]]`` for each of ``n`` indices
``i`` taken from array ``b``, with the results packed into the destination
buffer ``dst``. Two execution models are compared:

* baseline - the processor fetches ``b[i]`` itself, then the ranged
  elements, one index at a time: two memory round trips per index. Every
  fetch is a processor-side access at the source array's address.
* aia - the engine near memory resolves all indices locally and answers
  with one coalesced response stream per request: one round trip. The index
  fetches still happen (and are recorded), but they are internal to the
  engine and never touch the processor cache; the processor consumes the
  response stream at the packed destination buffer's ascending addresses.

Both modes fetch exactly the same multiset of (array, element) pairs per
request; the difference is who walks the indices and which addresses the
processor-side cache sees. Traces replay through a set-associative LRU
cache to compare hit ratios.

Addresses are symbolic: each named array gets a disjoint, 64-byte-aligned
base in declaration order, and every element is 8 bytes. The left and right
matrix operands always get distinct ranges, even when they are the same
object.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

import numpy as np

from . import _kernels
from .core import INDEX_DTYPE, CsrMatrix
from .engine import RowGroupPlan
from .errors import BadConfig, MismatchError, PlanMismatch, ResolverFailure

__all__ = [
    "ELEMENT_BYTES",
    "ARRAY_NAMES",
    "AiaRequest",
    "AccessTrace",
    "AddressLayout",
    "CacheConfig",
    "CacheStats",
    "ModeCell",
    "ModeReport",
    "build_spgemm_access_plan",
    "expand_trace",
    "simulate_cache",
    "compare_modes",
    "dump_trace",
]

ELEMENT_BYTES = 8

ARRAY_NAMES = (
    "row_ptr_a", "col_idx_a", "values_a",
    "row_ptr_b", "col_idx_b", "values_b",
    "row_map",
    "dst_row_extents", "dst_col_extents", "dst_cols", "dst_vals",
)

KIND_INDEX = 0
KIND_DATA = 1
KIND_NAMES = ("index-fetch", "data-fetch")

MODE_BASELINE = "baseline"
MODE_AIA = "aia"


def _align_up(x: int, boundary: int = 64) -> int:
    return (x + boundary - 1) // boundary * boundary


@dataclass(frozen=True)
class AddressLayout:
    """Deterministic byte addresses for a set of named arrays: contiguous
    placement in declaration order, 64-byte aligned, 8 bytes per element."""

    names: tuple[str, ...]
    sizes: tuple[int, ...]
    bases: tuple[int, ...]

    @classmethod
    def build(cls, sizes: Mapping[str, int]) -> "AddressLayout":
        known = [n for n in ARRAY_NAMES if n in sizes]
        extra = sorted(n for n in sizes if n not in ARRAY_NAMES)
        names = tuple(known + extra)
        bases = []
        cursor = 0
        for name in names:
            bases.append(cursor)
            cursor = _align_up(cursor + int(sizes[name]) * ELEMENT_BYTES)
        return cls(names=names, sizes=tuple(int(sizes[n]) for n in names),
                   bases=tuple(bases))

    def base_of(self, name: str) -> int:
        try:
            return self.bases[self.names.index(name)]
        except ValueError:
            raise ResolverFailure(f"array {name!r} is not in the address layout") from None

    def size_of(self, name: str) -> int:
        try:
            return self.sizes[self.names.index(name)]
        except ValueError:
            raise ResolverFailure(f"array {name!r} is not in the address layout") from None

    def addresses(self, name: str, indices: np.ndarray) -> np.ndarray:
        return self.base_of(name) + indices.astype(np.int64) * ELEMENT_BYTES


@dataclass(frozen=True)
class AiaRequest:
    """One ranged-indirect request: fetch ``r`` consecutive elements of
    ``a_base`` starting at ``a_base[b[i]]`` for each of the ``n`` indices
    ``b_base[b_offset .. b_offset+n)``, packed into ``dst``."""

    dst: str
    n: int
    r: int
    a_base: str
    b_base: str
    b_offset: int
    a_width: int = ELEMENT_BYTES
    b_width: int = ELEMENT_BYTES

    def __post_init__(self) -> None:
        if self.n < 0:
            raise BadConfig(f"request index count must be >= 0, got {self.n}")
        if self.r < 1:
            raise BadConfig(f"request range length must be >= 1, got {self.r}")
        if self.a_width not in (4, 8) or self.b_width not in (4, 8):
            raise BadConfig("element widths must be 4 or 8 bytes")
        if self.b_offset < 0:
            raise BadConfig(f"b_offset must be >= 0, got {self.b_offset}")


@dataclass
class AccessTrace:
    """Ordered memory events of one expanded request (structure-of-arrays).

    ``addrs`` holds the processor-visible replay address of each event: the
    source element's address in baseline mode, the packed response-stream
    (destination) address for aia data fetches. ``internal`` marks events
    that happen engine-side (aia index fetches); they are recorded but
    excluded from processor-cache replay.
    """

    mode: str
    array_ids: np.ndarray
    indices: np.ndarray
    addrs: np.ndarray
    kinds: np.ndarray
    internal: np.ndarray
    round_trips: int
    names: tuple[str, ...]

    @property
    def n_events(self) -> int:
        return int(self.array_ids.shape[0])

    def events(self) -> Iterator[tuple[str, int, int, str]]:
        for t in range(self.n_events):
            yield (self.names[self.array_ids[t]], int(self.indices[t]),
                   int(self.addrs[t]), KIND_NAMES[self.kinds[t]])

    def data_pairs(self) -> list[tuple[str, int]]:
        """The (array, element index) pairs of the data fetches, in event
        order; the multiset of these is mode-invariant."""
        mask = self.kinds == KIND_DATA
        return [(self.names[a], int(i))
                for a, i in zip(self.array_ids[mask], self.indices[mask])]


@dataclass(frozen=True)
class CacheConfig:
    """Geometry of the single-level processor cache model."""

    capacity_bytes: int = 128 * 1024
    line_bytes: int = 64
    associativity: int = 4
    replacement: str = "LRU"
    levels: int = 1

    def __post_init__(self) -> None:
        for label, v in (("capacity_bytes", self.capacity_bytes),
                         ("line_bytes", self.line_bytes),
                         ("associativity", self.associativity)):
            if v <= 0 or v & (v - 1):
                raise BadConfig(f"{label} must be a positive power of two, got {v}")
        if self.line_bytes < ELEMENT_BYTES:
            raise BadConfig(f"line_bytes must be >= {ELEMENT_BYTES}, got {self.line_bytes}")
        if self.capacity_bytes % (self.line_bytes * self.associativity):
            raise BadConfig("capacity must be divisible by line_bytes * associativity")
        if self.replacement != "LRU":
            raise BadConfig(f"only LRU replacement is modeled, got {self.replacement!r}")
        if self.levels != 1:
            raise BadConfig(f"only a single cache level is modeled, got {self.levels}")

    @property
    def n_sets(self) -> int:
        return self.capacity_bytes // (self.line_bytes * self.associativity)

    @property
    def line_shift(self) -> int:
        return self.line_bytes.bit_length() - 1


@dataclass(frozen=True)
class CacheStats:
    """Replay outcome; hit_ratio is 0 for an empty trace."""

    accesses: int
    hits: int
    misses: int

    def __post_init__(self) -> None:
        if self.hits + self.misses != self.accesses:
            raise BadConfig("cache stats must satisfy hits + misses = accesses")

    @property
    def hit_ratio(self) -> float:
        return self.hits / self.accesses if self.accesses else 0.0


class _CacheState:
    """Streaming set-associative LRU replay; state persists across chunks."""

    def __init__(self, cfg: CacheConfig) -> None:
        self.cfg = cfg
        self.tags = np.full(cfg.n_sets * cfg.associativity, -1, dtype=np.int64)
        self.ages = np.zeros(cfg.n_sets * cfg.associativity, dtype=np.int64)
        self.tick = 0
        self.accesses = 0
        self.hits = 0

    def replay(self, addrs: np.ndarray) -> None:
        if addrs.shape[0] == 0:
            return
        lines = np.asarray(addrs, dtype=np.int64) >> self.cfg.line_shift
        hits, tick = _kernels.cache_replay(
            np.ascontiguousarray(lines), self.cfg.n_sets, self.cfg.associativity,
            self.tags, self.ages, self.tick)
        self.hits += int(hits)
        self.tick = tick
        self.accesses += int(addrs.shape[0])

    def stats(self) -> CacheStats:
        return CacheStats(accesses=self.accesses, hits=self.hits,
                          misses=self.accesses - self.hits)


def _resolve_starts(req: AiaRequest, resolver: Mapping[str, np.ndarray]) -> np.ndarray:
    try:
        b = np.asarray(resolver[req.b_base])
    except (KeyError, TypeError):
        raise ResolverFailure(
            f"resolver does not supply index array {req.b_base!r}") from None
    if req.b_offset + req.n > b.shape[0]:
        raise ResolverFailure(
            f"index array {req.b_base!r} has {b.shape[0]} elements; request "
            f"needs [{req.b_offset}, {req.b_offset + req.n})")
    starts = b[req.b_offset:req.b_offset + req.n].astype(np.int64)
    if starts.size and int(starts.min()) < 0:
        raise ResolverFailure(f"index array {req.b_base!r} resolved a negative start")
    return starts


def _default_layout(req: AiaRequest, resolver: Mapping[str, np.ndarray]) -> AddressLayout:
    sizes = {name: int(np.asarray(arr).shape[0]) for name, arr in resolver.items()}
    sizes.setdefault(req.dst, req.n * req.r)
    if req.a_base not in sizes:
        raise ResolverFailure(
            f"resolver does not supply data array {req.a_base!r} and no layout was given")
    return AddressLayout.build(sizes)


def expand_trace(req: AiaRequest, resolver: Mapping[str, np.ndarray], mode: str,
                 layout: AddressLayout | None = None) -> AccessTrace:
    """Expand one request into its ordered memory events under a mode.

    baseline: per index i, an index fetch of b[i] followed by the r data
    fetches a[b[i]] .. a[b[i]+r-1]; 2n round trips. aia: the request's index
    fetches first (flagged internal), then the data fetches as one response
    stream at ascending packed destination addresses; 1 round trip (0 when
    n = 0).
    """
    if mode not in (MODE_BASELINE, MODE_AIA):
        raise BadConfig(f"unknown mode {mode!r}")
    starts = _resolve_starts(req, resolver)
    if layout is None:
        layout = _default_layout(req, resolver)
    names = layout.names
    ids = {name: t for t, name in enumerate(names)}
    for needed in (req.a_base, req.b_base, req.dst):
        if needed not in ids:
            raise ResolverFailure(f"array {needed!r} is not in the address layout")

    a_size = layout.size_of(req.a_base)
    if starts.size and int(starts.max()) + req.r > a_size:
        raise ResolverFailure(
            f"request reads past the end of {req.a_base!r} "
            f"({a_size} elements, range length {req.r})")

    n, r = req.n, req.r
    idx_indices = req.b_offset + np.arange(n, dtype=np.int64)
    data_indices = (starts[:, None] + np.arange(r, dtype=np.int64)[None, :]).ravel()

    if mode == MODE_BASELINE:
        total = n * (1 + r)
        array_ids = np.empty(total, dtype=np.int16)
        indices = np.empty(total, dtype=np.int64)
        kinds = np.empty(total, dtype=np.int8)
        block = array_ids.reshape(n, 1 + r) if n else array_ids.reshape(0, 1 + r)
        block[:, 0] = ids[req.b_base]
        block[:, 1:] = ids[req.a_base]
        indices.reshape(n, 1 + r)[:, 0] = idx_indices
        indices.reshape(n, 1 + r)[:, 1:] = data_indices.reshape(n, r)
        kinds.reshape(n, 1 + r)[:, 0] = KIND_INDEX
        kinds.reshape(n, 1 + r)[:, 1:] = KIND_DATA
        bases = np.asarray(layout.bases, dtype=np.int64)
        addrs = bases[array_ids] + indices * ELEMENT_BYTES
        internal = np.zeros(total, dtype=bool)
        return AccessTrace(MODE_BASELINE, array_ids, indices, addrs, kinds,
                           internal, round_trips=2 * n, names=names)

    total = n + n * r
    array_ids = np.empty(total, dtype=np.int16)
    indices = np.empty(total, dtype=np.int64)
    kinds = np.empty(total, dtype=np.int8)
    internal = np.zeros(total, dtype=bool)
    array_ids[:n] = ids[req.b_base]
    indices[:n] = idx_indices
    kinds[:n] = KIND_INDEX
    internal[:n] = True
    array_ids[n:] = ids[req.a_base]
    indices[n:] = data_indices
    kinds[n:] = KIND_DATA
    addrs = np.empty(total, dtype=np.int64)
    addrs[:n] = layout.addresses(req.b_base, idx_indices)
    dst_base = layout.base_of(req.dst)
    addrs[n:] = dst_base + np.arange(n * r, dtype=np.int64) * ELEMENT_BYTES
    return AccessTrace(MODE_AIA, array_ids, indices, addrs, kinds, internal,
                       round_trips=1 if n else 0, names=names)


def simulate_cache(trace: AccessTrace, cfg: CacheConfig) -> CacheStats:
    """Replay a trace's processor-visible events through a cold cache."""
    state = _CacheState(cfg)
    keep = ~trace.internal
    state.replay(trace.addrs[keep])
    return state.stats()


def dump_trace(trace: AccessTrace, fh) -> None:
    """Write one `<mode> <array> <index> <addr-hex> <kind>` line per event."""
    for name, index, addr, kind in trace.events():
        fh.write(f"{trace.mode} {name} {index} 0x{addr:x} {kind}\n")


# --------------------------------------------------------------------------
# Access-plan construction for the three-phase multiply
# --------------------------------------------------------------------------

PHASES = ("allocation", "accumulation")


def _check_operands(a: CsrMatrix, b: CsrMatrix, plan: RowGroupPlan) -> None:
    if plan.ip.shape[0] != a.n_rows:
        raise PlanMismatch(
            f"plan covers {plan.ip.shape[0]} rows but the left matrix has {a.n_rows}")
    if a.n_cols != b.n_rows:
        raise PlanMismatch(
            f"left matrix has {a.n_cols} columns but the right matrix has "
            f"{b.n_rows} rows")


def _live_rows(plan: RowGroupPlan) -> np.ndarray:
    """Processing order: the sorted row ids whose product count is positive.
    Rows with no intermediate products are skipped by both phases and so
    never reach memory."""
    order = plan.sorted_ids
    return order[plan.ip[order] > 0]


def build_spgemm_access_plan(a: CsrMatrix, b: CsrMatrix, plan: RowGroupPlan,
                             phase: str) -> list[AiaRequest]:
    """Materialize the request list the multiply's given phase issues.

    Three request families, in order: one r=2 request per non-empty row
    group fetching each processed row's [start, end) extent from the left
    row pointer (indexed through row_map, the live processing order); one
    r=2 request per processed row fetching the right row pointer extents
    for that row's column indices; and one range request per (row, nonzero)
    pair covering the right column-index span (plus a mirrored right-values
    span in the accumulation phase). Zero-length requests are never emitted.
    """
    if phase not in PHASES:
        raise PlanMismatch(f"unknown phase {phase!r}")
    _check_operands(a, b, plan)
    requests: list[AiaRequest] = []
    live = _live_rows(plan)
    group_of_live = plan.group[live]
    cuts = np.searchsorted(group_of_live, np.arange(5))
    for g in range(4):
        lo, hi = int(cuts[g]), int(cuts[g + 1])
        if hi > lo:
            requests.append(AiaRequest(dst="dst_row_extents", n=hi - lo, r=2,
                                       a_base="row_ptr_a", b_base="row_map",
                                       b_offset=lo))
    row_nnz = a.row_lengths()
    for row in live:
        row = int(row)
        n = int(row_nnz[row])
        if n:
            requests.append(AiaRequest(dst="dst_col_extents", n=n, r=2,
                                       a_base="row_ptr_b", b_base="col_idx_a",
                                       b_offset=int(a.row_ptr[row])))
    span_len = b.row_lengths()
    for row in live:
        row = int(row)
        for j in range(int(a.row_ptr[row]), int(a.row_ptr[row + 1])):
            c = int(a.col_idx[j])
            r = int(span_len[c])
            if r:
                requests.append(AiaRequest(dst="dst_cols", n=1, r=r,
                                           a_base="col_idx_b", b_base="row_ptr_b",
                                           b_offset=c))
    if phase == "accumulation":
        for row in live:
            row = int(row)
            for j in range(int(a.row_ptr[row]), int(a.row_ptr[row + 1])):
                c = int(a.col_idx[j])
                r = int(span_len[c])
                if r:
                    requests.append(AiaRequest(dst="dst_vals", n=1, r=r,
                                               a_base="values_b", b_base="row_ptr_b",
                                               b_offset=c))
    return requests


def plan_resolver(a: CsrMatrix, b: CsrMatrix, plan: RowGroupPlan) -> dict[str, np.ndarray]:
    """The index arrays the plan's requests resolve against."""
    return {
        "row_ptr_a": a.row_ptr,
        "col_idx_a": a.col_idx,
        "values_a": a.values,
        "row_ptr_b": b.row_ptr,
        "col_idx_b": b.col_idx,
        "values_b": b.values,
        "row_map": _live_rows(plan),
    }


def plan_layout(a: CsrMatrix, b: CsrMatrix, plan: RowGroupPlan) -> AddressLayout:
    """One deterministic layout covering both phases' arrays and buffers."""
    total_ip = int(plan.total_ip)
    n_level2 = int(a.nnz)
    sizes = {
        "row_ptr_a": a.n_rows + 1,
        "col_idx_a": a.nnz,
        "values_a": a.nnz,
        "row_ptr_b": b.n_rows + 1,
        "col_idx_b": b.nnz,
        "values_b": b.nnz,
        "row_map": a.n_rows,
        "dst_row_extents": 2 * a.n_rows,
        "dst_col_extents": 2 * n_level2,
        "dst_cols": total_ip,
        "dst_vals": total_ip,
    }
    return AddressLayout.build(sizes)


# --------------------------------------------------------------------------
# Vectorized family streams + mode comparison
# --------------------------------------------------------------------------

_MIX_A = np.uint64(0x9E3779B97F4A7C15)
_MIX_B = np.uint64(0xBF58476D1CE4E5B9)
_MIX_C = np.uint64(0x94D049BB133111EB)


def _mix64(x: np.ndarray) -> np.ndarray:
    z = x.astype(np.uint64) + _MIX_A
    z ^= z >> np.uint64(30)
    z *= _MIX_B
    z ^= z >> np.uint64(27)
    z *= _MIX_C
    z ^= z >> np.uint64(31)
    return z


class _Fingerprint:
    """Order-independent multiset fingerprint of (array id, index) pairs."""

    def __init__(self) -> None:
        self.count = 0
        self.total = np.uint64(0)
        self.folded = np.uint64(0)

    def update(self, array_id: int, indices: np.ndarray) -> None:
        if indices.shape[0] == 0:
            return
        codes = (np.int64(array_id) << np.int64(48)) | indices.astype(np.int64)
        mixed = _mix64(codes.view(np.uint64))
        self.count += int(indices.shape[0])
        with np.errstate(over="ignore"):
            self.total = np.uint64(self.total + mixed.sum(dtype=np.uint64))
        self.folded ^= np.bitwise_xor.reduce(mixed)

    def signature(self) -> tuple[int, int, int]:
        return (self.count, int(self.total), int(self.folded))


@dataclass(frozen=True)
class ModeCell:
    """One (phase, mode) replay summary."""

    round_trips: int
    accesses: int
    hits: int
    misses: int
    hit_ratio: float
    bytes_moved: int

    def to_dict(self) -> dict:
        return {
            "round_trips": self.round_trips,
            "accesses": self.accesses,
            "hits": self.hits,
            "misses": self.misses,
            "hit_ratio": self.hit_ratio,
            "bytes_moved": self.bytes_moved,
        }


@dataclass(frozen=True)
class ModeReport:
    """compare_modes output: per-phase baseline/aia cells plus law echoes."""

    phases: dict[str, dict[str, ModeCell]]
    request_counts: dict[str, int]
    index_totals: dict[str, int]
    data_fetches: dict[str, int]
    data_multiset_match: dict[str, bool]
    cache: CacheConfig = field(default_factory=CacheConfig)

    def to_dict(self) -> dict:
        return {
            "phases": {
                phase: {mode: cell.to_dict() for mode, cell in cells.items()}
                for phase, cells in self.phases.items()
            },
            "request_counts": dict(self.request_counts),
            "index_totals": dict(self.index_totals),
            "data_fetches": dict(self.data_fetches),
            "data_multiset_match": dict(self.data_multiset_match),
            "cache": {
                "capacity_bytes": self.cache.capacity_bytes,
                "line_bytes": self.cache.line_bytes,
                "associativity": self.cache.associativity,
                "replacement": self.cache.replacement,
                "levels": self.cache.levels,
            },
        }


class _Family:
    """One homogeneous batch of requests in flat (structure-of-arrays) form.

    Every index fetch k of the family carries ``idx_indices[k]`` (its
    position in the family's index array ``b_base``), a data range starting
    at element ``starts[k]`` of ``a_base`` with length ``lens[k]``, and the
    family's shared destination buffer. Baseline interleaves per index, so
    chunking may split anywhere on an index boundary; request bookkeeping
    (``request_count``) is carried separately.
    """

    def __init__(self, dst: str, a_base: str, b_base: str,
                 idx_indices: np.ndarray, starts: np.ndarray, lens: np.ndarray,
                 request_count: int) -> None:
        keep = lens > 0
        if not keep.all():
            idx_indices, starts, lens = idx_indices[keep], starts[keep], lens[keep]
        self.dst = dst
        self.a_base = a_base
        self.b_base = b_base
        self.idx_indices = idx_indices.astype(np.int64)
        self.starts = starts.astype(np.int64)
        self.lens = lens.astype(np.int64)
        self.request_count = request_count
        self.index_total = int(self.lens.shape[0])
        self.data_total = int(self.lens.sum())

    def chunks(self, max_events: int) -> Iterator[tuple[np.ndarray, np.ndarray, np.ndarray]]:
        """Yield (idx_indices, data_indices, lens) slices whose combined
        event count stays near ``max_events``."""
        n = self.index_total
        if n == 0:
            return
        weight = (self.lens + 1).cumsum()
        lo = 0
        consumed = 0
        while lo < n:
            hi = int(np.searchsorted(weight, consumed + max_events, side="right"))
            hi = min(max(hi, lo + 1), n)
            starts = self.starts[lo:hi]
            lens = self.lens[lo:hi]
            total = int(lens.sum())
            data = np.repeat(starts, lens) + (
                np.arange(total, dtype=np.int64)
                - np.repeat(np.concatenate(([0], np.cumsum(lens)[:-1])), lens))
            yield self.idx_indices[lo:hi], data, lens
            consumed = int(weight[hi - 1])
            lo = hi


def _phase_families(a: CsrMatrix, b: CsrMatrix, plan: RowGroupPlan,
                    phase: str) -> list[_Family]:
    live = _live_rows(plan)
    row_nnz = a.row_lengths()

    # Row extents: one request per group with processed rows; index k of
    # row_map maps to row live[k], whose extent is row_ptr_a[live[k] .. +2).
    level1 = _Family(
        "dst_row_extents", "row_ptr_a", "row_map",
        idx_indices=np.arange(live.shape[0], dtype=np.int64),
        starts=live.astype(np.int64),
        lens=np.full(live.shape[0], 2, dtype=np.int64),
        request_count=int(np.unique(plan.group[live]).shape[0]),
    )

    # Column extents: one request per processed row, walking A's column
    # indices in processing order; each column c reads row_ptr_b[c .. c+2).
    nnz_in_order = row_nnz[live]
    starts_rows = a.row_ptr[live]
    total_nnz = int(nnz_in_order.sum())
    gather = np.repeat(starts_rows, nnz_in_order) + (
        np.arange(total_nnz, dtype=np.int64)
        - np.repeat(np.concatenate(([0], np.cumsum(nnz_in_order)[:-1])), nnz_in_order))
    cols_in_order = a.col_idx[gather] if total_nnz else np.zeros(0, dtype=np.int64)
    level2 = _Family(
        "dst_col_extents", "row_ptr_b", "col_idx_a",
        idx_indices=gather,
        starts=cols_in_order,
        lens=np.full(total_nnz, 2, dtype=np.int64),
        request_count=int((nnz_in_order > 0).sum()),
    )

    # Column spans of the right matrix: one request per (row, nonzero) pair
    # whose span is non-empty; the start index lives at row_ptr_b[c].
    span_starts = b.row_ptr[cols_in_order]
    span_lens = b.row_lengths()[cols_in_order]
    n_span_requests = int((span_lens > 0).sum())
    spans = _Family("dst_cols", "col_idx_b", "row_ptr_b",
                    idx_indices=cols_in_order, starts=span_starts,
                    lens=span_lens, request_count=n_span_requests)

    families = [level1, level2, spans]
    if phase == "accumulation":
        families.append(_Family("dst_vals", "values_b", "row_ptr_b",
                                idx_indices=cols_in_order, starts=span_starts,
                                lens=span_lens, request_count=n_span_requests))
    return families


def compare_modes(a: CsrMatrix, b: CsrMatrix, plan: RowGroupPlan,
                  cfg: CacheConfig | None = None,
                  phases: Iterable[str] = PHASES,
                  chunk_events: int = 1 << 20) -> ModeReport:
    """Expand both phases' access plans under each mode, replay them through
    the cache model, and assert the round-trip law and data-multiset
    equality between modes."""
    cfg = cfg or CacheConfig()
    _check_operands(a, b, plan)
    layout = plan_layout(a, b, plan)
    bases = {name: layout.base_of(name) for name in layout.names}
    ids = {name: t for t, name in enumerate(layout.names)}

    report_phases: dict[str, dict[str, ModeCell]] = {}
    request_counts: dict[str, int] = {}
    index_totals: dict[str, int] = {}
    data_fetches: dict[str, int] = {}
    multiset_match: dict[str, bool] = {}

    for phase in phases:
        if phase not in PHASES:
            raise PlanMismatch(f"unknown phase {phase!r}")
        families = _phase_families(a, b, plan, phase)
        n_requests = sum(f.request_count for f in families)
        sum_n = sum(f.index_total for f in families)
        data_total = sum(f.data_total for f in families)

        cells: dict[str, ModeCell] = {}
        signatures: dict[str, tuple[int, int, int]] = {}
        for mode in (MODE_BASELINE, MODE_AIA):
            state = _CacheState(cfg)
            fp = _Fingerprint()
            round_trips = 0
            dst_cursor = 0
            for fam in families:
                a_id = ids[fam.a_base]
                a_base_addr = bases[fam.a_base]
                b_base_addr = bases[fam.b_base]
                dst_base_addr = bases[fam.dst]
                if mode == MODE_BASELINE:
                    round_trips += 2 * fam.index_total
                else:
                    round_trips += fam.request_count
                    dst_cursor = 0
                for idx, data, lens in fam.chunks(chunk_events):
                    fp.update(a_id, data)
                    if mode == MODE_AIA:
                        addrs = dst_base_addr + (
                            dst_cursor + np.arange(data.shape[0], dtype=np.int64)
                        ) * ELEMENT_BYTES
                        dst_cursor += int(data.shape[0])
                        state.replay(addrs)
                        continue
                    total = idx.shape[0] + data.shape[0]
                    addrs = np.empty(total, dtype=np.int64)
                    pos = np.concatenate(([0], np.cumsum(lens + 1)))[:-1]
                    addrs[pos] = b_base_addr + idx * ELEMENT_BYTES
                    mask = np.ones(total, dtype=bool)
                    mask[pos] = False
                    addrs[mask] = a_base_addr + data * ELEMENT_BYTES
                    state.replay(addrs)
            expected_accesses = (sum_n + data_total if mode == MODE_BASELINE
                                 else data_total)
            stats = state.stats()
            if stats.accesses != expected_accesses:
                raise MismatchError("replayed access count diverged from the plan",
                                    expected=expected_accesses, actual=stats.accesses)
            expected_rt = 2 * sum_n if mode == MODE_BASELINE else n_requests
            if round_trips != expected_rt:
                raise MismatchError("round-trip law violated",
                                    expected=expected_rt, actual=round_trips)
            signatures[mode] = fp.signature()
            cells[mode] = ModeCell(
                round_trips=round_trips,
                accesses=stats.accesses,
                hits=stats.hits,
                misses=stats.misses,
                hit_ratio=stats.hit_ratio,
                bytes_moved=stats.misses * cfg.line_bytes,
            )
        match = signatures[MODE_BASELINE] == signatures[MODE_AIA]
        if not match:
            raise MismatchError(f"data-fetch multisets diverged in phase {phase}",
                                expected=signatures[MODE_BASELINE],
                                actual=signatures[MODE_AIA])
        report_phases[phase] = cells
        request_counts[phase] = n_requests
        index_totals[phase] = sum_n
        data_fetches[phase] = data_total
        multiset_match[phase] = match

    return ModeReport(phases=report_phases, request_counts=request_counts,
                      index_totals=index_totals, data_fetches=data_fetches,
                      data_multiset_match=multiset_match, cache=cfg)
