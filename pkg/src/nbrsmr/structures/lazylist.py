"""Lazy list: a lock-based sorted linked list with a synchronization-free search.

Each operation is one read phase (the unsynchronized traversal) followed by
one write phase (lock pred and curr, validate, modify). The write phase only
touches pred and curr, which are exactly the records reserved at the end of
the read phase.
"""

from __future__ import annotations

from operator import attrgetter

from ..core import Lifecycle, Record, ThreadContext, stall_point
from .base import MAX_KEY, MIN_KEY, OpKind, OrderedSet, YieldingLock, check_key, result

_INSERTED = OpKind.INSERTED
_DUPLICATE = OpKind.DUPLICATE
_REMOVED = OpKind.REMOVED
_ABSENT = OpKind.ABSENT
_FOUND = OpKind.FOUND
_NOT_FOUND = OpKind.NOT_FOUND
_REACHABLE = Lifecycle.REACHABLE
_UNLINKED = Lifecycle.UNLINKED


class LazyNode(Record):
    __slots__ = ("key", "next", "marked", "lock")
    _get = attrgetter("key", "next", "marked")

    def __init__(self, key: int, nxt=None):
        Record.__init__(self)
        self.key = key
        self.next = nxt
        self.marked = False
        self.lock = YieldingLock()

    def scrub(self):
        self.key = None
        self.next = None
        self.marked = True


class LazyList(OrderedSet):
    name = "lazylist"

    def __init__(self, smr):
        self.smr = smr
        self.tail = LazyNode(MAX_KEY)
        self.head = LazyNode(MIN_KEY, self.tail)
        self.head.state = self.tail.state = _REACHABLE
        self._deref = smr.deref
        self._validate_keys = smr.debug
        if smr.per_access_protection:
            self._locate = self._locate_hp
        elif smr.plain_reads:
            self._locate = self._locate_plain
        else:
            self._locate = self._locate_guarded

    # -- read phase bodies ---------------------------------------------------
    def _locate_guarded(self, ctx: ThreadContext, key: int, reserve: bool = True):
        deref = self._deref
        pred = self.head
        _, curr, _ = deref(ctx, pred)
        ckey, nxt, cmarked = deref(ctx, curr)
        if ctx.pause_until:
            stall_point(ctx)
        while ckey < key:
            pred = curr
            curr = nxt
            ckey, nxt, cmarked = deref(ctx, curr)
        return (pred, curr, ckey, cmarked), ((pred, curr) if reserve else ())

    def _locate_plain(self, ctx: ThreadContext, key: int, reserve: bool = True):
        pred = self.head
        curr = pred.next
        if ctx.pause_until:
            stall_point(ctx)
        ckey = curr.key
        while ckey < key:
            pred = curr
            curr = curr.next
            ckey = curr.key
        return (pred, curr, ckey, curr.marked), ((pred, curr) if reserve else ())

    def _locate_hp(self, ctx: ThreadContext, key: int, reserve: bool = True):
        protect = self.smr.protect
        deref = self._deref
        while True:
            pred = self.head
            curr = pred.next
            if not protect(ctx, 1, curr, pred):
                ctx.restarts += 1
                continue
            if ctx.pause_until:
                stall_point(ctx)
            ip, ic = 0, 1
            ckey, nxt, cmarked = deref(ctx, curr)
            while ckey < key:
                free_slot = 3 - ip - ic
                if not protect(ctx, free_slot, nxt, curr):
                    break
                pred, ip = curr, ic
                curr, ic = nxt, free_slot
                ckey, nxt, cmarked = deref(ctx, curr)
            else:
                return (pred, curr, ckey, cmarked), ((pred, curr) if reserve else ())
            ctx.restarts += 1

    # -- write phase helpers -------------------------------------------------
    def _validate(self, ctx: ThreadContext, pred, curr) -> bool:
        _, pnext, pmarked = self._deref(ctx, pred)
        return not pmarked and pnext is curr

    # -- operations ----------------------------------------------------------
    def insert(self, ctx: ThreadContext, key: int):
        if self._validate_keys:
            check_key(key)
        smr = self.smr
        smr.begin_op(ctx)
        start = ctx.restarts
        while True:
            pred, curr, ckey, _ = smr.read_phase(ctx, self._locate, key)
            with pred.lock, curr.lock:
                if self._validate(ctx, pred, curr):
                    if ckey == key:
                        kind = _DUPLICATE
                    else:
                        node = LazyNode(key, curr)
                        node.state = _REACHABLE
                        pred.next = node
                        kind = _INSERTED
                    break
        smr.end_op(ctx)
        return result(kind, ctx.restarts - start)

    def delete(self, ctx: ThreadContext, key: int):
        if self._validate_keys:
            check_key(key)
        smr = self.smr
        smr.begin_op(ctx)
        start = ctx.restarts
        victim = None
        while True:
            pred, curr, ckey, _ = smr.read_phase(ctx, self._locate, key)
            with pred.lock, curr.lock:
                if self._validate(ctx, pred, curr):
                    if ckey == key:
                        _, cnext, _ = self._deref(ctx, curr)
                        curr.marked = True
                        pred.next = cnext
                        curr.state = _UNLINKED
                        victim = curr
                        kind = _REMOVED
                    else:
                        kind = _ABSENT
                    break
        if victim is not None:
            smr.retire(ctx, victim)
        smr.end_op(ctx)
        return result(kind, ctx.restarts - start)

    def contains(self, ctx: ThreadContext, key: int):
        smr = self.smr
        smr.begin_op(ctx)
        start = ctx.restarts
        _, _, ckey, cmarked = smr.read_phase(ctx, self._locate, key, False)
        smr.end_op(ctx)
        kind = _FOUND if ckey == key and not cmarked else _NOT_FOUND
        return result(kind, ctx.restarts - start)

    # -- quiescent inspection ------------------------------------------------
    def keys(self) -> list[int]:
        out = []
        node = self.head.next
        while node is not self.tail:
            if not node.marked:
                out.append(node.key)
            node = node.next
        return out
