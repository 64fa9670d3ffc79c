"""Harris lock-free sorted linked list with k read/write phase pairs.

Deletion marks a node's successor reference, then some search physically
unlinks the run of marked nodes with one compare-and-swap. A search may
therefore need several write phases (one per unlink attempt). Every new read
phase forgets all references and restarts from the head, because records
seen in an earlier read phase may have been freed since.

The successor reference is an immutable ``(node, marked)`` tuple, so a CAS
compares tuple identity; a per-node lock makes the compare-and-swap atomic.
"""

from __future__ import annotations

from operator import attrgetter

from ..core import Lifecycle, Record, ThreadContext, stall_point
from ..errors import RestartFromRootViolation
from .base import MAX_KEY, MIN_KEY, OpKind, OrderedSet, YieldingLock, check_key, result

_ALLOCATED = Lifecycle.ALLOCATED
_REACHABLE = Lifecycle.REACHABLE
_UNLINKED = Lifecycle.UNLINKED


class HarrisNode(Record):
    __slots__ = ("key", "next", "lock")
    _get = attrgetter("key", "next")

    def __init__(self, key: int, nxt=None):
        Record.__init__(self)
        self.key = key
        self.next = (nxt, False)
        self.lock = YieldingLock()

    def scrub(self):
        self.key = None
        self.next = (None, True)


def cas_next(node: HarrisNode, expected: tuple, new: tuple) -> bool:
    """Replace ``node.next`` with ``new`` if it is still the ``expected`` object."""
    with node.lock:
        if node.next is expected:
            node.next = new
            return True
        return False


class HarrisList(OrderedSet):
    name = "harrislist"

    def __init__(self, smr):
        self.smr = smr
        self.tail = HarrisNode(MAX_KEY)
        self.head = HarrisNode(MIN_KEY, self.tail)
        self.head.state = self.tail.state = _REACHABLE
        self._deref = smr.deref
        self._debug = smr.debug
        self.root_violations = 0
        self.searches = 0

    # -- search ----------------------------------------------------------------
    def _traverse(self, ctx: ThreadContext, key: int):
        """Read-phase body: find adjacent (left, right) with right.key >= key.

        Returns the observed ``left.next`` reference and, when marked nodes sit
        between left and right, the list of those nodes so the caller can retire
        them after unlinking. Reserves ``left`` and ``right``.
        """
        deref = self._deref
        head = self.head
        tail = self.tail
        while True:
            t = head
            _, t_next = deref(ctx, t)
            if ctx.pause_until:
                stall_point(ctx)
            left = head
            left_next = t_next
            while True:
                if not t_next[1]:
                    left = t
                    left_next = t_next
                t = t_next[0]
                if t is tail:
                    break
                tkey, t_next = deref(ctx, t)
                if not t_next[1] and tkey >= key:
                    break
            right = t
            if left_next[0] is right:
                if right is not tail and deref(ctx, right)[1][1]:
                    continue
                chain = ()
            else:
                chain = []
                node = left_next[0]
                while node is not right:
                    chain.append(node)
                    node = deref(ctx, node)[1][0]
            if self._debug and ctx.first_deref is not head:
                self.root_violations += 1
                raise RestartFromRootViolation(
                    f"tid {ctx.tid} began a read phase at {ctx.first_deref!r}")
            return (left, left_next, right, chain), (left, right)

    def _search(self, ctx: ThreadContext, key: int):
        """Return ``(left, left_ref, right)`` in a write phase reserving left and right.

        ``left_ref`` is the exact successor object currently stored in
        ``left.next``, suitable as the expected value of a later CAS.
        """
        smr = self.smr
        deref = self._deref
        tail = self.tail
        while True:
            self.searches += 1
            left, left_next, right, chain = smr.read_phase(ctx, self._traverse, key)
            if not chain:
                return left, left_next, right
            new_ref = (right, False)
            if cas_next(left, left_next, new_ref):
                for node in chain:
                    node.state = _UNLINKED
                    smr.retire(ctx, node)
                if right is not tail and deref(ctx, right)[1][1]:
                    continue
                return left, new_ref, right

    # -- operations -------------------------------------------------------------
    def insert(self, ctx: ThreadContext, key: int):
        if self._debug:
            check_key(key)
        smr = self.smr
        deref = self._deref
        smr.begin_op(ctx)
        start = ctx.restarts
        node = None
        while True:
            left, left_ref, right = self._search(ctx, key)
            if right is not self.tail and deref(ctx, right)[0] == key:
                kind = OpKind.DUPLICATE
                break
            if node is None:
                node = HarrisNode(key)
            node.next = (right, False)
            # Set before publishing: once linked, a concurrent delete may
            # unlink and retire the node before we run another line.
            node.state = _REACHABLE
            if cas_next(left, left_ref, (node, False)):
                kind = OpKind.INSERTED
                break
            node.state = _ALLOCATED
        smr.end_op(ctx)
        return result(kind, ctx.restarts - start)

    def delete(self, ctx: ThreadContext, key: int):
        if self._debug:
            check_key(key)
        smr = self.smr
        deref = self._deref
        tail = self.tail
        smr.begin_op(ctx)
        start = ctx.restarts
        while True:
            left, left_ref, right = self._search(ctx, key)
            if right is tail:
                kind = OpKind.ABSENT
                break
            rkey, right_next = deref(ctx, right)
            if rkey != key:
                kind = OpKind.ABSENT
                break
            if not right_next[1] and cas_next(right, right_next, (right_next[0], True)):
                kind = OpKind.REMOVED
                break
        if kind is OpKind.REMOVED:
            if cas_next(left, left_ref, (right_next[0], False)):
                right.state = _UNLINKED
                smr.retire(ctx, right)
            else:
                # Someone changed left.next; a search unlinks (and retires) the node.
                self._search(ctx, key)
        smr.end_op(ctx)
        return result(kind, ctx.restarts - start)

    def contains(self, ctx: ThreadContext, key: int):
        smr = self.smr
        smr.begin_op(ctx)
        start = ctx.restarts
        _, _, right = self._search(ctx, key)
        found = right is not self.tail and self._deref(ctx, right)[0] == key
        smr.end_op(ctx)
        return result(OpKind.FOUND if found else OpKind.NOT_FOUND, ctx.restarts - start)

    # -- quiescent inspection -----------------------------------------------------
    def keys(self) -> list[int]:
        out = []
        node, _ = self.head.next
        while node is not self.tail:
            nxt, marked = node.next
            if not marked:
                out.append(node.key)
            node = nxt
        return out
