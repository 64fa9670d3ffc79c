"""Neutralization: forcing read-phase threads back to their checkpoint.

A reclaimer broadcasts a neutralization to every other registered thread. A
target that is restartable (inside a read phase) discards its read phase and
re-runs it from the checkpoint taken at ``begin_read_phase``; a target in any
other phase ignores it.

Two backends deliver the request:

``CooperativeBackend``
    The broadcaster sets a pending flag on each target. Targets poll the flag
    inside every guarded dereference. The broadcaster waits until no target
    is in the middle of a dereference, so any later dereference observes the
    flag. That gives the same guarantee a synchronous signal handler gives:
    once ``broadcast`` returns, no restartable target can touch a record it
    found before the broadcast.

``AsyncInterruptBackend``
    Raises :class:`Neutralized` asynchronously in the target thread through
    ``PyThreadState_SetAsyncExc``. The exception lands at the next bytecode
    boundary the target executes, so read phases need no barrier at all, but
    delivery is not synchronous with the broadcaster.
"""

from __future__ import annotations

import ctypes
import time
from dataclasses import dataclass

from .core import ThreadContext, ThreadRegistry


class Neutralized(BaseException):
    """Unwinds a read phase back to its checkpoint.

    Derives from ``BaseException`` so ``except Exception`` blocks inside data
    structure code cannot swallow it.
    """

    def __init__(self, checkpoint=None):
        super().__init__(checkpoint)
        self.checkpoint = checkpoint


class Checkpoint:
    """Restart point of one read phase.

    Python unwinds the stack on ``raise``, so the checkpoint needs no saved
    registers: the read-phase loop is the landing site and ``generation``
    identifies which read phase the checkpoint belongs to.
    """

    __slots__ = ("tid", "generation")

    def __init__(self, tid: int, generation: int):
        self.tid = tid
        self.generation = generation

    def __repr__(self):
        return f"Checkpoint(tid={self.tid}, generation={self.generation})"


def capture_checkpoint(ctx: ThreadContext) -> Checkpoint:
    ctx.read_gen += 1
    cp = Checkpoint(ctx.tid, ctx.read_gen)
    ctx.checkpoint = cp
    return cp


def restore(ctx: ThreadContext):
    """Jump back to the checkpoint of the current read phase."""
    raise Neutralized(ctx.checkpoint)


@dataclass(frozen=True)
class NeutralizeCounters:
    broadcasts: int
    acks: int
    restarts: int


def counters(registry: ThreadRegistry) -> NeutralizeCounters:
    ctxs = registry.contexts()
    return NeutralizeCounters(
        broadcasts=sum(c.broadcasts for c in ctxs),
        acks=sum(c.acks for c in ctxs),
        restarts=sum(c.restarts for c in ctxs),
    )


class CooperativeBackend:
    kind = "cooperative"

    def arm(self, ctx: ThreadContext) -> None:
        """Make ``ctx`` restartable; stale requests from earlier phases are dropped."""
        ctx.pending = False
        ctx.restartable = True

    def handle(self, ctx: ThreadContext) -> None:
        """Signal-handler body: restart if restartable, otherwise ignore."""
        if ctx.restartable:
            ctx.pending = False
            ctx.acks += 1
            raise Neutralized(ctx.checkpoint)
        ctx.pending = False

    def enter_write(self, ctx: ThreadContext, rows: list, recs: tuple) -> None:
        """Publish reservations and leave the restartable state atomically.

        The publish happens inside the dereference window so a broadcaster
        either sees the reservations when it scans or makes us restart here.
        """
        ctx.in_deref = True
        if ctx.pending:
            ctx.in_deref = False
            self.handle(ctx)
        rows[ctx.tid] = recs
        ctx.reserved = recs
        ctx.restartable = False
        ctx.in_deref = False

    def signal(self, sender: ThreadContext, target: ThreadContext) -> None:
        target.pending = True
        spins = 0
        while target.in_deref:
            spins += 1
            time.sleep(0 if spins < 64 else 1e-5)

    def broadcast(self, sender: ThreadContext, registry: ThreadRegistry) -> None:
        sender.broadcasts += 1
        for target in registry.slots[:registry.high_water]:
            if target is not None and target is not sender:
                self.signal(sender, target)

    def restarted(self, ctx: ThreadContext) -> None:
        ctx.pending = False

    def make_deref(self, base_deref, debug: bool):
        handle = self.handle
        if not debug:
            def deref(ctx, rec):
                ctx.in_deref = True
                if ctx.pending and ctx.restartable:
                    ctx.in_deref = False
                    handle(ctx)
                contents = rec._get(rec)
                ctx.in_deref = False
                return contents
            return deref

        def deref(ctx, rec):
            ctx.in_deref = True
            try:
                if ctx.pending and ctx.restartable:
                    ctx.in_deref = False
                    handle(ctx)
                return base_deref(ctx, rec)
            finally:
                ctx.in_deref = False
        return deref


_set_async_exc = ctypes.pythonapi.PyThreadState_SetAsyncExc


def _raise_in(ident: int, exc_type) -> int:
    return _set_async_exc(ctypes.c_ulong(ident),
                          ctypes.py_object(exc_type) if exc_type is not None else None)


class AsyncInterruptBackend:
    """Delivers neutralization as an asynchronous exception.

    The target's lock serializes the broadcaster's restartable check with the
    target's own transition out of the read phase, so an exception is only
    ever injected into a thread that is still restartable and has not yet
    published its reservations.
    """

    kind = "async-interrupt"

    def arm(self, ctx: ThreadContext) -> None:
        ctx.restartable = True

    def handle(self, ctx: ThreadContext) -> None:
        if ctx.restartable:
            ctx.acks += 1
            raise Neutralized(ctx.checkpoint)

    def enter_write(self, ctx: ThreadContext, rows: list, recs: tuple) -> None:
        with ctx.lock:
            if ctx.async_pending:
                # Injected but not yet delivered: cancel it and restart here.
                _raise_in(ctx.ident, None)
                ctx.async_pending = False
                ctx.restartable = False
                ctx.acks += 1
                raise Neutralized(ctx.checkpoint)
            rows[ctx.tid] = recs
            ctx.reserved = recs
            ctx.restartable = False

    def signal(self, sender: ThreadContext, target: ThreadContext) -> None:
        with target.lock:
            if target.restartable and not target.async_pending:
                target.async_pending = True
                _raise_in(target.ident, Neutralized)

    def broadcast(self, sender: ThreadContext, registry: ThreadRegistry) -> None:
        sender.broadcasts += 1
        for target in registry.slots[:registry.high_water]:
            if target is not None and target is not sender:
                self.signal(sender, target)

    def restarted(self, ctx: ThreadContext) -> None:
        with ctx.lock:
            if ctx.async_pending:
                ctx.async_pending = False
                ctx.acks += 1
            ctx.restartable = False

    def make_deref(self, base_deref, debug: bool):
        return base_deref


def make_backend(kind: str):
    if kind == "cooperative":
        return CooperativeBackend()
    if kind == "async-interrupt":
        return AsyncInterruptBackend()
    raise ValueError(f"unknown backend {kind!r}")
