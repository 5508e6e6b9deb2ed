"""Hot inner loops: hash-table phases, bitonic sort, cache replay.

Everything here must stay numba-nopython compatible; the same source runs
interpreted when SPGEMMKIT_NO_NUMBA is set (see _accel). The hash probe is
(key * multiplier) & (size - 1) with linear probing, table sizes are always
powers of two, and -1 is the empty sentinel.

A gathered count of -1 reported in the `counts` output means a probe loop
cycled without finding a slot (TableFull); callers turn that into an error.
Table sizing from intermediate-product counts makes it unreachable in
honest use.
"""

import numpy as np

from ._accel import hot

KEY_SENTINEL = np.int64(np.iinfo(np.int64).max)


@hot
def alloc_rows(rpt_a, col_a, rpt_b, col_b, rows, sizes, multiplier, counts):
    """Symbolic pass for a batch of rows: counts[t] = distinct output columns
    of rows[t], or -1 on table overflow."""
    for t in range(rows.shape[0]):
        i = rows[t]
        size = sizes[t]
        if size == 0:
            counts[t] = 0
            continue
        mask = size - 1
        table = np.full(size, -1, dtype=np.int64)
        cnt = 0
        failed = False
        for j in range(rpt_a[i], rpt_a[i + 1]):
            col = col_a[j]
            for k in range(rpt_b[col], rpt_b[col + 1]):
                key = col_b[k]
                pos = (key * multiplier) & mask
                placed = False
                for _probe in range(size):
                    cur = table[pos]
                    if cur == key:
                        placed = True
                        break
                    if cur == -1:
                        table[pos] = key
                        cnt += 1
                        placed = True
                        break
                    pos = (pos + 1) & mask
                if not placed:
                    failed = True
                    break
            if failed:
                break
        counts[t] = -1 if failed else cnt


@hot
def accum_rows(rpt_a, col_a, val_a, rpt_b, col_b, val_b, rows, sizes, multiplier,
               rpt_c, col_c, val_c, use_bitonic, gathered):
    """Numeric pass for a batch of rows: hash-accumulate, gather the table in
    slot order into the row's output span, then sort the span by column."""
    for t in range(rows.shape[0]):
        i = rows[t]
        size = sizes[t]
        start = rpt_c[i]
        expected = rpt_c[i + 1] - start
        if size == 0:
            gathered[t] = 0
            continue
        mask = size - 1
        table = np.full(size, -1, dtype=np.int64)
        tval = np.zeros(size, dtype=np.float64)
        failed = False
        for j in range(rpt_a[i], rpt_a[i + 1]):
            col = col_a[j]
            va = val_a[j]
            for k in range(rpt_b[col], rpt_b[col + 1]):
                key = col_b[k]
                contrib = va * val_b[k]
                pos = (key * multiplier) & mask
                placed = False
                for _probe in range(size):
                    cur = table[pos]
                    if cur == key:
                        tval[pos] += contrib
                        placed = True
                        break
                    if cur == -1:
                        table[pos] = key
                        tval[pos] += contrib
                        placed = True
                        break
                    pos = (pos + 1) & mask
                if not placed:
                    failed = True
                    break
            if failed:
                break
        if failed:
            gathered[t] = -1
            continue
        cnt = 0
        for s in range(size):
            if table[s] != -1:
                if cnt < expected:
                    col_c[start + cnt] = table[s]
                    val_c[start + cnt] = tval[s]
                cnt += 1
        gathered[t] = cnt
        if cnt != expected:
            continue
        if use_bitonic and expected <= 8192:
            bitonic_span(col_c, val_c, start, expected)
        else:
            seg_cols = col_c[start:start + expected].copy()
            seg_vals = val_c[start:start + expected].copy()
            order = np.argsort(seg_cols)
            for p in range(expected):
                col_c[start + p] = seg_cols[order[p]]
                val_c[start + p] = seg_vals[order[p]]


@hot
def bitonic_span(col_c, val_c, start, length):
    """Ascending bitonic network over a (column, value) span, padded with
    KEY_SENTINEL keys up to the next power of two."""
    n = 1
    while n < length:
        n <<= 1
    keys = np.full(n, KEY_SENTINEL, dtype=np.int64)
    vals = np.zeros(n, dtype=np.float64)
    for p in range(length):
        keys[p] = col_c[start + p]
        vals[p] = val_c[start + p]
    k = 2
    while k <= n:
        j = k >> 1
        while j > 0:
            for a in range(n):
                b = a ^ j
                if b > a:
                    ascending = (a & k) == 0
                    if (keys[a] > keys[b]) == ascending:
                        keys[a], keys[b] = keys[b], keys[a]
                        vals[a], vals[b] = vals[b], vals[a]
            j >>= 1
        k <<= 1
    for p in range(length):
        col_c[start + p] = keys[p]
        val_c[start + p] = vals[p]


@hot
def cache_replay(lines, n_sets, assoc, tags, ages, tick):
    """Set-associative LRU replay over pre-shifted line numbers.

    `tags`/`ages` persist across calls so long traces can stream through in
    chunks. Empty ways carry tag -1 and age 0 (always least recent).
    Returns (hits, tick) with the updated logical clock.
    """
    hits = 0
    set_mask = n_sets - 1
    for p in range(lines.shape[0]):
        line = lines[p]
        base = (line & set_mask) * assoc
        tick += 1
        found = -1
        for w in range(assoc):
            if tags[base + w] == line:
                found = w
                break
        if found >= 0:
            hits += 1
            ages[base + found] = tick
        else:
            victim = 0
            oldest = ages[base]
            for w in range(1, assoc):
                if ages[base + w] < oldest:
                    oldest = ages[base + w]
                    victim = w
            tags[base + victim] = line
            ages[base + victim] = tick
    return hits, tick
