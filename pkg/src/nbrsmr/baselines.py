"""Comparison reclaimers: leaky (never frees), epoch-based, hazard pointers."""

from __future__ import annotations

import threading

from .core import Reclaimer, ThreadContext


class LeakyReclaimer(Reclaimer):
    """Retired records are counted and kept forever."""

    name = "leaky"

    def retire(self, ctx: ThreadContext, rec) -> None:
        if self.debug:
            self._debug_retire(ctx, rec)
        ctx.retired += 1


class EpochState:
    __slots__ = ("announced", "active", "bags", "tags", "check_next", "sweep_epoch", "ops")

    def __init__(self):
        self.announced = 0
        self.active = False
        self.bags = [[], [], []]
        self.tags = [-1, -1, -1]
        self.check_next = 0
        self.sweep_epoch = 0
        self.ops = 0


class EBRReclaimer(Reclaimer):
    """Epoch-based reclamation with three limbo bags per thread.

    A thread announces the global epoch when an operation starts. The global
    epoch advances once every active thread has announced it. A record retired
    while the global epoch was ``e`` can be freed once the global epoch reaches
    ``e + 2``: every thread active at retire time has since finished that
    operation. Bags are tagged with the global epoch at retire time. A single
    thread that stays inside an operation holds the epoch back, so garbage
    grows without bound while it stalls.
    """

    name = "ebr"

    def __init__(self, config=None, allocator=None, monitor=None):
        super().__init__(config, allocator, monitor)
        self.epoch = 0
        self._advance_lock = threading.Lock()
        self._orphans: list[tuple[int, list]] = []

    def _new_context(self, tid: int) -> ThreadContext:
        ctx = ThreadContext(tid)
        ctx.limbo = []
        ctx.local = EpochState()
        return ctx

    def begin_op(self, ctx: ThreadContext) -> None:
        state = ctx.local
        state.announced = self.epoch
        state.active = True
        super().begin_op(ctx)
        state.ops += 1
        self._try_advance(ctx, state)
        self._free_expired(ctx, state)

    def end_op(self, ctx: ThreadContext) -> None:
        super().end_op(ctx)
        ctx.local.active = False

    def abort_op(self, ctx: ThreadContext) -> None:
        super().abort_op(ctx)
        ctx.local.active = False

    def _try_advance(self, ctx: ThreadContext, state: EpochState) -> None:
        """Check one other thread per call; advance after a clean full sweep.

        The sweep restarts whenever the epoch moves, so every slot is checked
        against the same epoch value that the sweep finally advances from.
        """
        epoch = self.epoch
        if state.sweep_epoch != epoch:
            state.sweep_epoch = epoch
            state.check_next = 0
        slots = self.registry.slots
        hw = self.registry.high_water
        i = state.check_next
        # Our own slot and empty slots cost nothing to check.
        while i < hw and (slots[i] is None or slots[i] is ctx):
            i += 1
        if i < hw:
            o = slots[i].local
            if o.active and o.announced != epoch:
                state.check_next = i
                return
            i += 1
            while i < hw and (slots[i] is None or slots[i] is ctx):
                i += 1
        if i >= hw:
            with self._advance_lock:
                if self.epoch == epoch:
                    self.epoch = epoch + 1
            i = 0
        state.check_next = i

    def _free_expired(self, ctx: ThreadContext, state: EpochState) -> None:
        horizon = self.epoch - 2
        for i in range(3):
            bag = state.bags[i]
            if bag and state.tags[i] <= horizon:
                self._free_all(ctx, bag)
                state.bags[i] = []
        if self._orphans and self._orphans[0][0] <= horizon:
            self._adopt_expired(ctx, horizon)

    def retire(self, ctx: ThreadContext, rec) -> None:
        if self.debug:
            self._debug_retire(ctx, rec)
        state = ctx.local
        epoch = self.epoch
        slot = epoch % 3
        if state.tags[slot] != epoch:
            # Same slot, older tag: at least three epochs old, so safe.
            if state.bags[slot]:
                self._free_all(ctx, state.bags[slot])
                state.bags[slot] = []
            state.tags[slot] = epoch
        state.bags[slot].append(rec)
        ctx.retired += 1

    def drain(self, ctx: ThreadContext) -> None:
        """Hand unexpired bags to the reclaimer; a later begin_op frees them."""
        state = ctx.local
        state.active = False
        self._free_expired(ctx, state)
        with self._advance_lock:
            for tag, bag in zip(state.tags, state.bags):
                if bag:
                    ctx.retired -= len(bag)
                    self._orphans.append((tag, bag))
            self._orphans.sort(key=lambda item: item[0])
        state.bags = [[], [], []]

    def _adopt_expired(self, ctx: ThreadContext, horizon: int) -> None:
        with self._advance_lock:
            ready = [bag for tag, bag in self._orphans if tag <= horizon]
            self._orphans = [item for item in self._orphans if item[0] > horizon]
        for bag in ready:
            ctx.retired += len(bag)
            self._free_all(ctx, bag)

    def limbo_size(self, ctx: ThreadContext) -> int:
        return sum(len(b) for b in ctx.local.bags)

    def unreclaimed_total(self) -> int:
        return super().unreclaimed_total() + sum(len(b) for _, b in self._orphans)


class HazardState:
    __slots__ = ("slots", "retired")

    def __init__(self, n: int):
        self.slots = [None] * n
        self.retired: list = []


class HPReclaimer(Reclaimer):
    """Hazard pointers: every access publishes the record, then validates it.

    Structures call :meth:`protect` for each record they step to; a scan frees
    retired records no thread currently protects.
    """

    name = "hp"
    per_access_protection = True

    def __init__(self, config=None, allocator=None, monitor=None):
        super().__init__(config, allocator, monitor)
        self.scan_threshold = self.config.hp_scan_threshold
        self.hp_slots = self.config.hp_slots

    def _new_context(self, tid: int) -> ThreadContext:
        ctx = ThreadContext(tid)
        ctx.local = HazardState(self.hp_slots)
        ctx.limbo = ctx.local.retired
        return ctx

    def protect(self, ctx: ThreadContext, idx: int, rec, src) -> bool:
        """Publish ``rec`` in slot ``idx``; True if ``src`` still links to it unmarked.

        ``src`` must itself be protected (or be a sentinel).
        """
        ctx.local.slots[idx] = rec
        return src.next is rec and not src.marked

    def clear(self, ctx: ThreadContext) -> None:
        slots = ctx.local.slots
        for i in range(len(slots)):
            slots[i] = None

    def end_op(self, ctx: ThreadContext) -> None:
        super().end_op(ctx)
        self.clear(ctx)

    def abort_op(self, ctx: ThreadContext) -> None:
        super().abort_op(ctx)
        self.clear(ctx)

    def retire(self, ctx: ThreadContext, rec) -> None:
        if self.debug:
            self._debug_retire(ctx, rec)
        retired = ctx.local.retired
        retired.append(rec)
        ctx.retired += 1
        if len(retired) >= self.scan_threshold:
            self.scan(ctx)

    def scan(self, ctx: ThreadContext) -> int:
        orphans = self.registry.take_orphans()
        if orphans:
            ctx.local.retired.extend(orphans)
            ctx.retired += len(orphans)
        hazards = set()
        for other in self.registry.slots[:self.registry.high_water]:
            if other is not None:
                hazards.update(h for h in other.local.slots if h is not None)
        state = ctx.local
        keep = [r for r in state.retired if r in hazards]
        freed = [r for r in state.retired if r not in hazards] if keep else state.retired
        state.retired = keep
        ctx.limbo = keep
        ctx.events += 1
        n = self._free_all(ctx, freed)
        if self.monitor is not None:
            self.monitor.on_event(ctx, len(keep))
        return n

    def drain(self, ctx: ThreadContext) -> None:
        self.clear(ctx)
        if ctx.local.retired:
            self.scan(ctx)
        leftovers = ctx.local.retired
        if leftovers:
            ctx.local.retired = []
            ctx.limbo = ctx.local.retired
            ctx.retired -= len(leftovers)
            self.registry.add_orphans(leftovers)

    def unreclaimed_total(self) -> int:
        return super().unreclaimed_total() + len(self.registry.orphans)

