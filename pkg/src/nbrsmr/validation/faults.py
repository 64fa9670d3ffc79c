"""Inject neutralizations at chosen points of chosen read phases.

The injector hooks the debug read barrier of one thread. It counts the
distinct read phases the thread begins after :meth:`FaultInjector.attach`
(restarts of a phase do not count as new phases) and, inside each selected
phase, fires once at the ``at_deref``-th dereference, exactly as if a
broadcast had arrived there.
"""

from __future__ import annotations

from ..core import Phase, ThreadContext
from ..neutralization import Neutralized


class FaultInjector:
    def __init__(self, phases=None, at_deref: int = 2):
        """``phases``: 1-based read-phase ordinals to hit, or None for every phase."""
        if at_deref < 1:
            raise ValueError("at_deref must be at least 1")
        self.phases = None if phases is None else frozenset(phases)
        self.at_deref = at_deref
        self.injected: list[int] = []
        self._base = 0
        self._current = None
        self._count = 0

    @property
    def injections(self) -> int:
        return len(self.injected)

    def attach(self, ctx: ThreadContext) -> "FaultInjector":
        self._base = ctx.read_phase_no
        self._current = None
        self._count = 0
        ctx.fault = self
        return self

    def detach(self, ctx: ThreadContext) -> None:
        if ctx.fault is self:
            ctx.fault = None

    def __call__(self, ctx: ThreadContext, rec) -> None:
        if ctx.phase != Phase.READ or not ctx.restartable:
            return
        ordinal = ctx.read_phase_no - self._base
        if ordinal in self.injected:
            return
        if self.phases is not None and ordinal not in self.phases:
            return
        key = (ordinal, ctx.read_gen)
        if key != self._current:
            self._current = key
            self._count = 0
        self._count += 1
        if self._count >= self.at_deref:
            self.injected.append(ordinal)
            ctx.acks += 1
            raise Neutralized(ctx.checkpoint)
