"""NBR+: NBR with a low watermark that piggybacks on other threads' broadcasts.

Every thread owns an announce clock. It increments the clock to an odd value
just before broadcasting and to the next even value just after reclaiming.
Once a thread's bag passes the low watermark it snapshots all clocks and
bookmarks its bag tail. If some other thread's clock later advances by at least
two, that thread has run a complete broadcast after the snapshot, so every
record retired before the bookmark can be freed without a broadcast of our own.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import ThreadContext
from .nbr import NBRReclaimer


def normalize(clocks) -> list[int]:
    """Round odd clock values (broadcast in progress) up to the next even value.

    A broadcast that was already running at snapshot time may have signaled
    us before we retired anything, so it must not count; requiring the clock
    to move two past the rounded value waits for a broadcast that started
    after the snapshot.
    """
    return [v + (v & 1) for v in clocks]


@dataclass(frozen=True)
class RgpPredicateInput:
    """Inputs of the grace-period test, kept together for table-driven tests."""

    scan: tuple
    current: tuple
    self_tid: int | None = None


def rgp_detected(scan, current, self_tid: int | None = None) -> bool:
    """True if some thread other than ``self_tid`` advanced its clock by two or more."""
    for tid, (seen, now) in enumerate(zip(scan, current)):
        if tid != self_tid and now >= seen + 2:
            return True
    return False


class WatermarkState:
    """Per-thread low-watermark bookkeeping."""

    __slots__ = ("first_lo_entry", "bookmark", "scan", "countdown",
                 "lo_reclaims", "hi_reclaims")

    def __init__(self):
        self.first_lo_entry = True
        self.bookmark = 0
        self.scan: list[int] = []
        self.countdown = 0
        self.lo_reclaims = 0
        self.hi_reclaims = 0


class NBRPlusReclaimer(NBRReclaimer):
    name = "nbrplus"

    def __init__(self, config=None, allocator=None, monitor=None):
        super().__init__(config, allocator, monitor)
        self.lo_threshold = self.config.lo_threshold
        self.scan_every = self.config.scan_every
        self.announce = [0] * self.config.capacity

    def _new_context(self, tid: int) -> ThreadContext:
        ctx = super()._new_context(tid)
        ctx.local = WatermarkState()
        return ctx

    def retire(self, ctx: ThreadContext, rec) -> None:
        if self.debug:
            self._check_retire(ctx, rec)
        bag = ctx.limbo
        size = len(bag.entries)
        if size >= self.threshold:
            self.reclamation_event(ctx)
        elif size >= self.lo_threshold:
            state = ctx.local
            if state.first_lo_entry:
                self.lo_enter(ctx)
            else:
                state.countdown -= 1
                if state.countdown <= 0:
                    state.countdown = self.scan_every
                    if self.lo_check(ctx):
                        self.reclaim_to_bookmark(ctx)
        bag.entries.append(rec)
        ctx.retired += 1

    # -- high watermark ----------------------------------------------------
    def rgp_begin(self, ctx: ThreadContext) -> None:
        self.announce[ctx.tid] += 1

    def rgp_end(self, ctx: ThreadContext) -> None:
        self.announce[ctx.tid] += 1

    def reclamation_event(self, ctx: ThreadContext) -> int:
        self._adopt_orphans(ctx)
        self.rgp_begin(ctx)
        self.signal_all(ctx)
        freed = self.reclaim_freeable(ctx, ctx.limbo.tail())
        self.rgp_end(ctx)
        ctx.local.hi_reclaims += 1
        self.cleanup(ctx)
        self._after_event(ctx)
        return freed

    def drain(self, ctx: ThreadContext) -> None:
        if not ctx.limbo.entries:
            return
        self.rgp_begin(ctx)
        super().drain(ctx)
        self.rgp_end(ctx)
        self.cleanup(ctx)

    # -- low watermark -----------------------------------------------------
    def lo_enter(self, ctx: ThreadContext) -> None:
        state = ctx.local
        state.bookmark = ctx.limbo.tail()
        state.scan = normalize(self.announce)
        state.first_lo_entry = False
        state.countdown = self.scan_every

    def lo_check(self, ctx: ThreadContext) -> bool:
        return rgp_detected(ctx.local.scan, self.announce, ctx.tid)

    def reclaim_to_bookmark(self, ctx: ThreadContext) -> int:
        """Free unreserved records up to the bookmark without broadcasting."""
        freed = self.reclaim_freeable(ctx, ctx.local.bookmark)
        ctx.local.lo_reclaims += 1
        self.cleanup(ctx)
        self._after_event(ctx)
        return freed

    def cleanup(self, ctx: ThreadContext) -> None:
        ctx.local.first_lo_entry = True

