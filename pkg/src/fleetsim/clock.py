"""Deterministic discrete-event scheduler on an integer-nanosecond virtual clock.

Everything in sim mode runs off one `EventLoop`: message deliveries, robot
ticks, discovery heartbeats, planner debounce timers.  Time is kept in
integer nanoseconds so that two runs with the same seed produce bit-identical
schedules and therefore bit-identical logs.
"""

from __future__ import annotations

import heapq
import itertools
from typing import Callable

NS_PER_S = 1_000_000_000


def s_to_ns(seconds: float) -> int:
    return int(round(seconds * NS_PER_S))


def ns_to_s(ns: int) -> float:
    return ns / NS_PER_S


class Timer:
    """Cancellable handle for a scheduled callback."""

    __slots__ = ("due_ns", "seq", "fn", "cancelled")

    def __init__(self, due_ns: int, seq: int, fn: Callable[[], None]):
        self.due_ns = due_ns
        self.seq = seq
        self.fn = fn
        self.cancelled = False

    def cancel(self) -> None:
        self.cancelled = True

    def __lt__(self, other: "Timer") -> bool:
        return (self.due_ns, self.seq) < (other.due_ns, other.seq)


class PeriodicTimer:
    """Cancellation flag shared by the firings of one periodic schedule."""

    __slots__ = ("cancelled",)

    def __init__(self) -> None:
        self.cancelled = False

    def cancel(self) -> None:
        self.cancelled = True


class EventLoop:
    """Single-threaded event queue ordered by (due time, insertion order).

    Insertion order breaks ties, so events scheduled for the same instant
    run FIFO.  That total order is what makes whole-system runs replayable.
    """

    def __init__(self, start_ns: int = 0):
        self._now_ns = start_ns
        self._heap: list[Timer] = []
        self._seq = itertools.count()

    @property
    def now_ns(self) -> int:
        return self._now_ns

    @property
    def now_s(self) -> float:
        return ns_to_s(self._now_ns)

    def call_at(self, due_ns: int, fn: Callable[[], None]) -> Timer:
        if due_ns < self._now_ns:
            due_ns = self._now_ns
        timer = Timer(due_ns, next(self._seq), fn)
        heapq.heappush(self._heap, timer)
        return timer

    def call_later(self, delay_s: float, fn: Callable[[], None]) -> Timer:
        return self.call_at(self._now_ns + s_to_ns(delay_s), fn)

    def call_every(self, period_s: float, fn: Callable[[], None],
                   first_delay_s: float = 0.0) -> "PeriodicTimer":
        """Schedule `fn` periodically; cancel the returned handle to stop."""
        handle = PeriodicTimer()
        period_ns = s_to_ns(period_s)

        def fire() -> None:
            if handle.cancelled:
                return
            fn()
            if not handle.cancelled:
                self.call_at(self._now_ns + period_ns, fire)

        self.call_at(self._now_ns + s_to_ns(first_delay_s), fire)
        return handle

    def peek_next_ns(self) -> int | None:
        while self._heap and self._heap[0].cancelled:
            heapq.heappop(self._heap)
        return self._heap[0].due_ns if self._heap else None

    def step(self) -> bool:
        """Run the next due event. Returns False when the queue is empty."""
        while self._heap:
            timer = heapq.heappop(self._heap)
            if timer.cancelled:
                continue
            self._now_ns = timer.due_ns
            timer.fn()
            return True
        return False

    def run_until(self, end_ns: int) -> None:
        """Run all events due at or before `end_ns`, then set now to `end_ns`."""
        while True:
            nxt = self.peek_next_ns()
            if nxt is None or nxt > end_ns:
                break
            self.step()
        if end_ns > self._now_ns:
            self._now_ns = end_ns

    def run_for(self, duration_s: float) -> None:
        self.run_until(self._now_ns + s_to_ns(duration_s))

    def run_until_idle(self, max_events: int = 1_000_000) -> int:
        """Drain the queue completely. Returns the number of events run."""
        count = 0
        while self.step():
            count += 1
            if count >= max_events:
                raise RuntimeError("event loop did not go idle "
                                   f"within {max_events} events")
        return count
