"""Record lifecycle, execution phases, the thread registry and the reclaimer contract.

Every scheme in this package (NBR, NBR+, EBR, hazard pointers, leaky) derives
from :class:`Reclaimer` and is driven by the data structures through the same
handful of calls::

    smr.begin_op(ctx)
    result = smr.read_phase(ctx, body, *args)   # body returns (result, reservations)
    ... write phase: touch only reserved records, retire unlinked ones ...
    smr.end_op(ctx)

``read_phase`` wraps ``begin_read_phase``/``end_read_phase`` and transparently
re-runs ``body`` when the thread is neutralized.
"""

from __future__ import annotations

import itertools
import threading
import time
from enum import IntEnum
from typing import Callable, Iterable

from .config import SMRConfig
from .errors import (
    CapacityExceeded,
    DoubleRetire,
    IllegalLifecycleTransition,
    IllegalTransition,
    PoisonDetected,
)


class Lifecycle(IntEnum):
    ALLOCATED = 0
    REACHABLE = 1
    UNLINKED = 2
    SAFE = 3
    RECLAIMED = 4


class Phase(IntEnum):
    QUIESCENT = 0
    PREAMBLE = 1
    READ = 2
    WRITE = 3


# quiescent -> preamble -> (read -> write)+ -> quiescent
LEGAL_PHASE_EDGES = frozenset({
    (Phase.QUIESCENT, Phase.PREAMBLE),
    (Phase.PREAMBLE, Phase.READ),
    (Phase.READ, Phase.WRITE),
    (Phase.WRITE, Phase.READ),
    (Phase.WRITE, Phase.QUIESCENT),
})

LIVE_MAGIC = 0x4C495645
POISON_MAGIC = 0xDEADBEEF

_record_ids = itertools.count()


class Record:
    """Identity and lifecycle state of one shared record.

    Subclasses add payload fields and set ``_get`` to a callable that loads
    the payload as a tuple (used by read barriers). ``magic`` is the prefix
    word the debug read barrier compares against the poison pattern.
    """

    __slots__ = ("rid", "state", "magic")
    payload_size = 0

    def __init__(self):
        self.rid = next(_record_ids)
        self.state = Lifecycle.ALLOCATED
        self.magic = LIVE_MAGIC

    @staticmethod
    def _get(rec):
        return rec

    def scrub(self):
        """Overwrite payload fields with garbage; subclasses extend."""

    @property
    def poisoned(self) -> bool:
        return self.magic != LIVE_MAGIC

    def __repr__(self):
        return f"<{type(self).__name__} rid={self.rid} {self.state.name.lower()}>"


def lifecycle_advance(rec: Record, to: Lifecycle) -> None:
    """Move ``rec`` exactly one step forward along the five-state lifecycle."""
    if to != rec.state + 1:
        raise IllegalLifecycleTransition(
            f"record {rec.rid}: {rec.state.name} -> {Lifecycle(to).name}")
    rec.state = to


def transition_phase(ctx: "ThreadContext", to: Phase) -> None:
    if (ctx.phase, to) not in LEGAL_PHASE_EDGES:
        raise IllegalTransition(f"tid {ctx.tid}: {ctx.phase.name} -> {Phase(to).name}")
    ctx.phase = to


def _transition_unchecked(ctx, to):
    ctx.phase = to


class ThreadContext:
    """Per-thread state. Only the owning thread writes it, others may read."""

    __slots__ = (
        "tid", "ident", "phase", "restartable", "pending", "in_deref",
        "async_pending", "lock", "checkpoint", "read_gen", "read_phase_no",
        "restarting", "resume_phase", "reserved", "first_deref", "fault",
        "limbo", "local", "retired", "freed", "broadcasts", "restarts", "acks",
        "events", "peak_limbo", "pause_until", "pause_event", "registered",
    )

    def __init__(self, tid: int):
        self.tid = tid
        self.ident = threading.get_ident()
        self.phase = Phase.QUIESCENT
        self.restartable = False
        self.pending = False
        self.in_deref = False
        self.async_pending = False
        self.lock = threading.Lock()
        self.checkpoint = None
        self.read_gen = 0
        self.read_phase_no = 0
        self.restarting = False
        self.resume_phase = Phase.PREAMBLE
        self.reserved = ()
        self.first_deref = None
        self.fault = None
        self.limbo = None
        self.local = None
        self.retired = 0
        self.freed = 0
        self.broadcasts = 0
        self.restarts = 0
        self.acks = 0
        self.events = 0
        self.peak_limbo = 0
        self.pause_until = 0.0
        self.pause_event = None
        self.registered = True

    def __repr__(self):
        return (f"<ThreadContext tid={self.tid} {self.phase.name.lower()} "
                f"restartable={self.restartable}>")

    def unreclaimed(self) -> int:
        return self.retired - self.freed


class ThreadRegistry:
    """Fixed-capacity slot table; slot index is the thread id."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.slots: list[ThreadContext | None] = [None] * capacity
        self.high_water = 0
        self.orphans: list = []
        self._lock = threading.Lock()

    def register(self, factory: Callable[[int], ThreadContext]) -> ThreadContext:
        with self._lock:
            for tid, slot in enumerate(self.slots):
                if slot is None:
                    break
            else:
                raise CapacityExceeded(f"all {self.capacity} slots are taken")
            ctx = factory(tid)
            self.slots[tid] = ctx
            self.high_water = max(self.high_water, tid + 1)
            return ctx

    def unregister(self, ctx: ThreadContext) -> None:
        with self._lock:
            if self.slots[ctx.tid] is ctx:
                self.slots[ctx.tid] = None
            ctx.registered = False

    def contexts(self) -> list[ThreadContext]:
        return [c for c in self.slots[:self.high_water] if c is not None]

    @property
    def active_count(self) -> int:
        return len(self.contexts())

    def add_orphans(self, records: Iterable) -> None:
        with self._lock:
            self.orphans.extend(records)

    def take_orphans(self) -> list:
        if not self.orphans:
            return []
        with self._lock:
            taken, self.orphans = self.orphans, []
        return taken


def stall_point(ctx: ThreadContext) -> None:
    """Sleep here once if the harness asked this thread to stall.

    Data structures call this from inside their traversal, so a stalled thread
    sleeps while holding references (inside a read phase or an epoch).
    """
    deadline = ctx.pause_until
    ctx.pause_until = 0.0
    wait = deadline - time.monotonic()
    if wait <= 0:
        return
    if ctx.pause_event is not None:
        ctx.pause_event.wait(wait)
    else:
        time.sleep(wait)


class ReleaseAllocator:
    """Non-debug allocator: freeing simply drops the record."""

    debug = False

    def __init__(self):
        self.detections: list = []

    def free(self, rec):
        rec.state = Lifecycle.RECLAIMED

    def report(self, rec, ctx):
        err = PoisonDetected(rec, ctx.tid, ctx.phase.name.lower())
        self.detections.append(err)
        raise err


class Reclaimer:
    """Uniform interface implemented by every reclamation scheme.

    Subclasses override the hooks they need; the defaults describe a scheme
    that never neutralizes (EBR, leaky).
    """

    name = "abstract"
    neutralizing = False
    per_access_protection = False
    checks_reservations = False

    def __init__(self, config: SMRConfig | None = None, allocator=None, monitor=None):
        self.config = (config or SMRConfig()).with_env()
        self.debug = self.config.debug
        self.registry = ThreadRegistry(self.config.capacity)
        if allocator is None:
            if self.debug:
                from .validation.quarantine import QuarantineAllocator
                allocator = QuarantineAllocator(self.config.quarantine_capacity)
            else:
                allocator = ReleaseAllocator()
        self.allocator = allocator
        self.monitor = monitor
        self._transition = transition_phase if self.debug else _transition_unchecked
        self._retired_ids: set[int] = set()
        self._retired_lock = threading.Lock()
        self.deref = self._build_deref()

    # -- registration -----------------------------------------------------
    def _new_context(self, tid: int) -> ThreadContext:
        ctx = ThreadContext(tid)
        ctx.limbo = []
        return ctx

    def register_thread(self) -> ThreadContext:
        """Register the calling thread; returns its quiescent context."""
        return self.registry.register(self._new_context)

    def unregister_thread(self, ctx: ThreadContext) -> None:
        """Drain the thread's garbage and free its slot for reuse."""
        self.drain(ctx)
        self.registry.unregister(ctx)

    def drain(self, ctx: ThreadContext) -> None:
        pass

    # -- operation and phase boundaries -----------------------------------
    def begin_op(self, ctx: ThreadContext) -> None:
        self._transition(ctx, Phase.PREAMBLE)

    def end_op(self, ctx: ThreadContext) -> None:
        self._transition(ctx, Phase.QUIESCENT)

    def abort_op(self, ctx: ThreadContext) -> None:
        """Force ``ctx`` back to quiescent after an exception escaped an operation."""
        ctx.restartable = False
        ctx.pending = False
        ctx.in_deref = False
        ctx.phase = Phase.QUIESCENT

    def begin_read_phase(self, ctx: ThreadContext) -> None:
        ctx.resume_phase = ctx.phase
        self._transition(ctx, Phase.READ)
        ctx.first_deref = None
        if ctx.restarting:
            ctx.restarting = False
        else:
            ctx.read_phase_no += 1

    def end_read_phase(self, ctx: ThreadContext, recs=()) -> None:
        self._transition(ctx, Phase.WRITE)

    def read_phase(self, ctx: ThreadContext, body, *args):
        """Run ``body(ctx, *args) -> (result, reservations)`` as one read phase."""
        self.begin_read_phase(ctx)
        result, reserved = body(ctx, *args)
        self.end_read_phase(ctx, reserved)
        return result

    # -- read barrier ------------------------------------------------------
    def _build_deref(self):
        if not self.debug:
            def deref(ctx, rec):
                return rec._get(rec)
            return deref
        report = self.allocator.report

        def deref(ctx, rec):
            if ctx.fault is not None:
                ctx.fault(ctx, rec)
            if rec.magic != LIVE_MAGIC:
                report(rec, ctx)
            if ctx.first_deref is None:
                ctx.first_deref = rec
            return rec._get(rec)
        return deref

    @property
    def plain_reads(self) -> bool:
        """True when reads need no barrier, so structures may inline loads."""
        return not self.debug and not self.neutralizing and not self.per_access_protection

    # -- retirement --------------------------------------------------------
    def _debug_retire(self, ctx: ThreadContext, rec: Record) -> None:
        if rec.state != Lifecycle.UNLINKED:
            raise IllegalLifecycleTransition(
                f"retire of record {rec.rid} in state {rec.state.name}")
        with self._retired_lock:
            if rec.rid in self._retired_ids:
                raise DoubleRetire(f"record {rec.rid} retired twice")
            self._retired_ids.add(rec.rid)

    def retire(self, ctx: ThreadContext, rec: Record) -> None:
        raise NotImplementedError

    def _free_all(self, ctx: ThreadContext, recs: list) -> int:
        if self.debug:
            free = self.allocator.free
            with self._retired_lock:
                for rec in recs:
                    self._retired_ids.discard(rec.rid)
            for rec in recs:
                lifecycle_advance(rec, Lifecycle.SAFE)
                free(rec)
        else:
            reclaimed = Lifecycle.RECLAIMED
            for rec in recs:
                rec.state = reclaimed
        ctx.freed += len(recs)
        return len(recs)

    # -- introspection -----------------------------------------------------
    def limbo_size(self, ctx: ThreadContext) -> int:
        return len(ctx.limbo)

    def unreclaimed_total(self) -> int:
        return sum(c.unreclaimed() for c in self.registry.contexts())
