"""Clock abstraction so protocol timers can run on virtual time in tests.

Entities take a clock object with two views of time: ``monotonic_ns`` drives
arrival stamps, deadlines and protocol timers; ``wall_ns`` supplies source
timestamps. ``ManualClock`` collapses both onto a single counter that only
moves when the test advances it.
"""

from __future__ import annotations

import time


class SystemClock:
    """Real process clocks."""

    def monotonic_ns(self) -> int:
        return time.monotonic_ns()

    def wall_ns(self) -> int:
        return time.time_ns()


class ManualClock:
    """Virtual clock advanced explicitly by the caller."""

    def __init__(self, start_ns: int = 0):
        self._now = start_ns

    def advance(self, delta_ns: int) -> int:
        if delta_ns < 0:
            raise ValueError("clock cannot move backwards")
        self._now += delta_ns
        return self._now

    def monotonic_ns(self) -> int:
        return self._now

    def wall_ns(self) -> int:
        return self._now
