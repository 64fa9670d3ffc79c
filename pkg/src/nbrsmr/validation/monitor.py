"""Bounded-garbage monitor.

NBR guarantees that right after a reclamation event a thread's limbo bag
holds at most R*(p-1) reserved records plus the one being retired, and that
it never exceeds S + R*(p-1) + 1. Summed over p threads that all just
reclaimed, unreclaimed records stay within p*(R*(p-1)+1).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field


def post_event_bound(threads: int, reservations: int) -> int:
    return reservations * (threads - 1) + 1


def steady_bound(threads: int, reservations: int, threshold: int) -> int:
    return threshold + post_event_bound(threads, reservations)


def global_bound(threads: int, reservations: int, threshold: int) -> int:
    """Upper bound on total unreclaimed records across ``threads`` threads."""
    return threads * steady_bound(threads, reservations, threshold)


@dataclass
class BoundReport:
    passed: bool
    post_event_peak: int
    steady_peak: int
    global_after_round: int | None
    violations: list[str] = field(default_factory=list)


class BoundMonitor:
    """Collects limbo-size samples from reclamation events and periodic checks.

    Reclaimers call :meth:`on_event` after every reclamation event with the
    bag size that survived it. The harness calls :meth:`sample` periodically
    (about every 2**16 retires) with the current per-thread sizes.
    """

    SAMPLE_EVERY = 1 << 16

    def __init__(self, threads: int, reservations: int, threshold: int):
        self.threads = threads
        self.reservations = reservations
        self.threshold = threshold
        self.post_event_peak = 0
        self.steady_peak = 0
        self.global_peak = 0
        self.per_thread_peak: dict[int, int] = {}
        self.events_seen: set[int] = set()
        self.global_after_round: int | None = None
        self._lock = threading.Lock()

    def on_event(self, ctx, size: int) -> None:
        with self._lock:
            if size > self.post_event_peak:
                self.post_event_peak = size
            self._note(ctx.tid, size)
            self.events_seen.add(ctx.tid)

    def _note(self, tid: int, size: int) -> None:
        if size > self.steady_peak:
            self.steady_peak = size
        if size > self.per_thread_peak.get(tid, 0):
            self.per_thread_peak[tid] = size

    def sample(self, sizes: dict[int, int]) -> None:
        with self._lock:
            for tid, size in sizes.items():
                self._note(tid, size)
            total = sum(sizes.values())
            if total > self.global_peak:
                self.global_peak = total

    def record_round(self, total_unreclaimed: int) -> None:
        """Report the global count right after every thread ran a reclamation event."""
        self.global_after_round = total_unreclaimed


def check_garbage_bound(monitor: BoundMonitor) -> BoundReport:
    p, r, s = monitor.threads, monitor.reservations, monitor.threshold
    post = post_event_bound(p, r)
    steady = steady_bound(p, r, s)
    violations = []
    if monitor.post_event_peak > post:
        violations.append(f"post-event limbo {monitor.post_event_peak} > {post}")
    if monitor.steady_peak > steady:
        violations.append(f"steady-state limbo {monitor.steady_peak} > {steady}")
    if monitor.global_after_round is not None and monitor.global_after_round > p * post:
        violations.append(f"global after round {monitor.global_after_round} > {p * post}")
    return BoundReport(not violations, monitor.post_event_peak, monitor.steady_peak,
                       monitor.global_after_round, violations)
