"""Debug allocator that poisons freed records and delays their release.

A freed record has its magic word overwritten with the poison pattern and its
payload scrubbed, then sits in a FIFO quarantine. Any later guarded
dereference of it trips the poison check, so a use-after-free shows up as an
exception instead of silently reading recycled memory.
"""

from __future__ import annotations

import threading
from collections import deque

from ..core import POISON_MAGIC, Lifecycle
from ..errors import PoisonDetected


class QuarantineAllocator:
    debug = True

    def __init__(self, capacity: int = 1 << 20):
        self.capacity = capacity
        self.queue: deque = deque()
        self.detections: list[PoisonDetected] = []
        self.released = 0
        self._lock = threading.Lock()

    def free(self, rec) -> None:
        """Poison ``rec`` and quarantine it; the oldest block leaves when full."""
        rec.magic = POISON_MAGIC
        rec.scrub()
        rec.state = Lifecycle.RECLAIMED
        with self._lock:
            self.queue.append(rec)
            if len(self.queue) > self.capacity:
                self.queue.popleft()
                self.released += 1

    def report(self, rec, ctx):
        """Record a use-after-free and raise it."""
        err = PoisonDetected(rec, ctx.tid if ctx is not None else None,
                             ctx.phase.name.lower() if ctx is not None else None)
        with self._lock:
            self.detections.append(err)
        raise err

    @property
    def poison_count(self) -> int:
        return len(self.detections)

    def __len__(self):
        return len(self.queue)
