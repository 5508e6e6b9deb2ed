"""Open-addressing accumulator for column keys and running value sums.

The probe sequence is the multiply-then-mask scheme used by the engine's
compiled kernels: ``slot = (key * multiplier) mod table_size`` with linear
probing and wraparound. Empty slots hold the sentinel -1.

This class is the *concurrency contract* implementation: insert is a
compare-and-set (linearizable under concurrent callers) and accumulate is
an atomic add, both guarded by one lock so the contract holds under real
threads. The engine's hot path runs the same algorithm inside compiled
kernels on worker-owned tables; this object backs shared_table_mode, where
several workers insert into one table, and the contract tests.
"""

import threading

import numpy as np

from .errors import TableFull

DEFAULT_MULTIPLIER = 0x9E3779B1  # odd, well spread for power-of-two tables


def next_pow2(n):
    return 1 << max(int(n) - 1, 0).bit_length() if n > 1 else 1


class HashAccumulator:
    def __init__(self, table_size, with_values=False, multiplier=DEFAULT_MULTIPLIER):
        if table_size <= 0 or table_size & (table_size - 1):
            raise ValueError(f"table_size must be a positive power of two, got {table_size}")
        if multiplier % 2 == 0:
            raise ValueError("multiplier must be odd")
        self.table_size = table_size
        self.multiplier = multiplier
        self.table = np.full(table_size, -1, dtype=np.int64)
        self.table_val = np.zeros(table_size, dtype=np.float64) if with_values else None
        self.unique_count = 0
        self._lock = threading.Lock()

    def slot_of(self, key):
        return (key * self.multiplier) % self.table_size

    def _find_or_claim(self, key):
        """Return (slot, inserted). Claiming a slot is a CAS under the lock."""
        if key < 0:
            raise ValueError(f"keys must be non-negative, got {key}")
        pos = self.slot_of(key)
        for _ in range(self.table_size):
            cur = self.table[pos]
            if cur == key:
                return pos, False
            if cur == -1:
                with self._lock:
                    cur = self.table[pos]  # re-check: another worker may have won
                    if cur == -1:
                        self.table[pos] = key
                        self.unique_count += 1
                        return pos, True
                    if cur == key:
                        return pos, False
                # lost the race to a different key: keep probing
            pos = (pos + 1) % self.table_size
        raise TableFull(f"no free slot for key {key} in table of {self.table_size}")

    def insert(self, key):
        """Insert a column key; True iff it was absent."""
        return self._find_or_claim(key)[1]

    def accumulate(self, key, val_a, val_b):
        """Add val_a*val_b into the key's slot, inserting the key if new."""
        if self.table_val is None:
            raise ValueError("accumulator was built without a value table")
        pos, _ = self._find_or_claim(key)
        with self._lock:
            self.table_val[pos] += val_a * val_b

    def keys(self):
        """Stored keys in slot order (the gather order of the engine)."""
        return self.table[self.table != -1]

    def entries(self):
        mask = self.table != -1
        return self.table[mask], self.table_val[mask]
