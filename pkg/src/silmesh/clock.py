"""Injectable clocks: wall time for deployments, simulated time for tests.

Transaction timeouts and every timestamp written into a document come from
a Clock, so the harness can replay a scenario deterministically and jump
past timeouts without sleeping.
"""

from __future__ import annotations

import threading
import time


class Clock:
    def now(self) -> float:
        raise NotImplementedError

    def sleep(self, seconds: float) -> None:
        raise NotImplementedError

    def stamp(self) -> str:
        """Current time as the canonical UTC timestamp string."""
        return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(self.now()))


class WallClock(Clock):
    def now(self) -> float:
        return time.time()

    def sleep(self, seconds: float) -> None:
        time.sleep(seconds)


class SimClock(Clock):
    """Manually advanced clock; sleep() advances instead of blocking."""

    def __init__(self, start: float = 1577836800.0):  # 2020-01-01T00:00:00Z
        self._now = start
        self._lock = threading.Lock()

    def now(self) -> float:
        with self._lock:
            return self._now

    def advance(self, seconds: float) -> None:
        with self._lock:
            self._now += seconds

    def sleep(self, seconds: float) -> None:
        self.advance(seconds)
