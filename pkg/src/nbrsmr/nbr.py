"""Neutralization-based reclamation (NBR).

Each thread keeps retired records in a limbo bag. When the bag reaches the
threshold S the thread broadcasts a neutralization, collects every other
thread's published reservations, and frees everything in its bag that is not
reserved. Restartable readers hold no protection at all: they are forced back
to their checkpoint instead.
"""

from __future__ import annotations

from .core import Phase, Reclaimer, Record, ThreadContext
from .errors import (
    IllegalTransition,
    ReservationViolation,
    TooManyReservations,
)
from .neutralization import Neutralized, capture_checkpoint, make_backend


class LimboBag:
    """Ordered bag of retired-but-not-freed records owned by one thread.

    ``tail()`` is a position marker; records appended later are never freed
    by a reclamation pass bounded by that marker.
    """

    __slots__ = ("entries",)

    def __init__(self):
        self.entries: list = []

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def append(self, rec) -> None:
        self.entries.append(rec)

    def tail(self) -> int:
        return len(self.entries)

    def reclaim(self, reserved, upto: int) -> list:
        """Remove and return the unreserved records among the first ``upto``.

        Reserved records stay in the bag, in their original order, ahead of
        anything appended after the marker.
        """
        entries = self.entries
        if upto >= len(entries):
            head, rest = entries, []
        else:
            head, rest = entries[:upto], entries[upto:]
        if reserved:
            kept = [r for r in head if r in reserved]
            freed = [r for r in head if r not in reserved] if kept else head
        else:
            kept, freed = [], head
        self.entries = kept + rest if kept else rest
        return freed


class ReservationTable:
    """N rows of up to R published record references, one row per thread."""

    def __init__(self, capacity: int, max_per_row: int):
        self.max_per_row = max_per_row
        self.rows: list[tuple] = [()] * capacity

    def publish(self, tid: int, recs) -> None:
        recs = tuple(recs)
        if len(recs) > self.max_per_row:
            raise TooManyReservations(
                f"{len(recs)} reservations exceed the limit of {self.max_per_row}")
        self.rows[tid] = recs

    def clear(self, tid: int) -> None:
        self.rows[tid] = ()

    def collect(self, exclude: int | None = None, upto: int | None = None) -> set:
        """Union of all rows except ``exclude``, as a set of records."""
        out = set()
        rows = self.rows if upto is None else self.rows[:upto]
        for tid, row in enumerate(rows):
            if row and tid != exclude:
                out.update(row)
        return out


class NBRReclaimer(Reclaimer):
    name = "nbr"
    neutralizing = True
    checks_reservations = True

    def __init__(self, config=None, allocator=None, monitor=None):
        super().__init__(config, allocator, monitor)
        self.backend = make_backend(self.config.backend)
        self.table = ReservationTable(self.config.capacity, self.config.max_reservations)
        self.threshold = self.config.threshold
        self.max_reservations = self.config.max_reservations
        self.deref = self.backend.make_deref(self.deref, self.debug)
        if self.debug:
            self.deref = self._with_reservation_check(self.deref)

    def _with_reservation_check(self, inner):
        """Write-phase accesses must target reserved records (debug builds)."""
        report = self.allocator.report

        def deref(ctx, rec):
            if ctx.phase == Phase.WRITE:
                if rec.poisoned:
                    report(rec, ctx)
                if rec not in ctx.reserved:
                    raise ReservationViolation(
                        f"tid {ctx.tid} touched unreserved record {rec.rid} in a write phase")
            return inner(ctx, rec)
        return deref

    def _new_context(self, tid: int) -> ThreadContext:
        ctx = ThreadContext(tid)
        ctx.limbo = LimboBag()
        self.table.rows[tid] = ()
        return ctx

    @property
    def plain_reads(self) -> bool:
        return not self.debug and self.backend.kind == "async-interrupt"

    # -- phases ------------------------------------------------------------
    def begin_read_phase(self, ctx: ThreadContext) -> None:
        self.table.rows[ctx.tid] = ()
        ctx.reserved = ()
        capture_checkpoint(ctx)
        super().begin_read_phase(ctx)
        self.backend.arm(ctx)

    def end_read_phase(self, ctx: ThreadContext, recs=()) -> None:
        if len(recs) > self.max_reservations:
            raise TooManyReservations(
                f"{len(recs)} reservations exceed the limit of {self.max_reservations}")
        if self.debug and ctx.phase != Phase.READ:
            raise IllegalTransition(f"tid {ctx.tid}: end_read_phase outside a read phase")
        self.backend.enter_write(ctx, self.table.rows, tuple(recs))
        ctx.phase = Phase.WRITE

    def end_op(self, ctx: ThreadContext) -> None:
        super().end_op(ctx)
        if self.config.clear_on_end_op:
            self.table.rows[ctx.tid] = ()
            ctx.reserved = ()

    def read_phase(self, ctx: ThreadContext, body, *args):
        while True:
            try:
                self.begin_read_phase(ctx)
                result, reserved = body(ctx, *args)
                self.end_read_phase(ctx, reserved)
                return result
            except Neutralized:
                self._restarted(ctx)

    def _restarted(self, ctx: ThreadContext) -> None:
        self.backend.restarted(ctx)
        ctx.restartable = False
        ctx.restarts += 1
        ctx.restarting = True
        ctx.phase = ctx.resume_phase

    def abort_op(self, ctx: ThreadContext) -> None:
        if self.backend.kind == "async-interrupt":
            self.backend.restarted(ctx)
        super().abort_op(ctx)

    # -- retirement and reclamation ---------------------------------------
    def _check_retire(self, ctx: ThreadContext, rec: Record) -> None:
        if ctx.phase != Phase.WRITE:
            raise IllegalTransition(f"tid {ctx.tid}: retire outside a write phase")
        self._debug_retire(ctx, rec)

    def retire(self, ctx: ThreadContext, rec: Record) -> None:
        if self.debug:
            self._check_retire(ctx, rec)
        bag = ctx.limbo
        if len(bag.entries) >= self.threshold:
            self.reclamation_event(ctx)
        bag.entries.append(rec)
        ctx.retired += 1

    def signal_all(self, ctx: ThreadContext) -> None:
        self.backend.broadcast(ctx, self.registry)

    def reclamation_event(self, ctx: ThreadContext) -> int:
        """Broadcast, then free every unreserved record in the bag."""
        self._adopt_orphans(ctx)
        self.signal_all(ctx)
        freed = self.reclaim_freeable(ctx, ctx.limbo.tail())
        self._after_event(ctx)
        return freed

    def reclaim_freeable(self, ctx: ThreadContext, upto: int) -> int:
        reserved = self.table.collect(exclude=ctx.tid, upto=self.registry.high_water)
        freed = ctx.limbo.reclaim(reserved, upto)
        return self._free_all(ctx, freed)

    def _after_event(self, ctx: ThreadContext) -> None:
        ctx.events += 1
        size = len(ctx.limbo.entries)
        if size > ctx.peak_limbo:
            ctx.peak_limbo = size
        if self.monitor is not None:
            self.monitor.on_event(ctx, size)

    def _adopt_orphans(self, ctx: ThreadContext) -> None:
        orphans = self.registry.take_orphans()
        if orphans:
            ctx.limbo.entries[:0] = orphans
            ctx.retired += len(orphans)

    def drain(self, ctx: ThreadContext) -> None:
        """Reclaim as much as possible; hand reserved leftovers to the registry."""
        if not ctx.limbo.entries:
            return
        self.signal_all(ctx)
        self.reclaim_freeable(ctx, ctx.limbo.tail())
        leftovers = ctx.limbo.entries
        if leftovers:
            ctx.limbo.entries = []
            ctx.retired -= len(leftovers)
            self.registry.add_orphans(leftovers)
        self.table.rows[ctx.tid] = ()
        ctx.reserved = ()

    def limbo_size(self, ctx: ThreadContext) -> int:
        return len(ctx.limbo.entries)

    def unreclaimed_total(self) -> int:
        return super().unreclaimed_total() + len(self.registry.orphans)

