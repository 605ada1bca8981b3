"""Logical time.

The whole system runs on a single monotonically increasing integer tick
instead of wall-clock time, which is what makes challenge TTLs, bank
settlement delays and approval latencies reproducible in tests.
"""

from __future__ import annotations

import threading


class LogicalClock:
    def __init__(self, start: int = 0):
        self._now = start
        self._lock = threading.Lock()

    @property
    def now(self) -> int:
        return self._now

    def tick(self) -> int:
        """Advance by one and return the new tick."""
        with self._lock:
            self._now += 1
            return self._now

    def advance(self, ticks: int) -> int:
        if ticks < 0:
            raise ValueError("clock never runs backwards")
        with self._lock:
            self._now += ticks
            return self._now
