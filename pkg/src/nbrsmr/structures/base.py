"""Result types and helpers shared by the ordered-set implementations."""

from __future__ import annotations

from _thread import allocate_lock as _allocate_lock
from enum import Enum
from time import sleep as _sleep
from typing import NamedTuple

MIN_KEY = -(1 << 63)
MAX_KEY = (1 << 63) - 1


class OpKind(Enum):
    INSERTED = "inserted"
    DUPLICATE = "duplicate"
    REMOVED = "removed"
    ABSENT = "absent"
    FOUND = "found"
    NOT_FOUND = "not-found"

    @property
    def succeeded(self) -> bool:
        return self in (OpKind.INSERTED, OpKind.REMOVED, OpKind.FOUND)


class SetOperationResult(NamedTuple):
    kind: OpKind
    restarts: int = 0


# Most operations never restart; reuse one immutable result per kind.
_NO_RESTART = {kind: SetOperationResult(kind, 0) for kind in OpKind}


def result(kind: OpKind, restarts: int) -> SetOperationResult:
    if restarts == 0:
        return _NO_RESTART[kind]
    return SetOperationResult(kind, restarts)


def check_key(key: int) -> None:
    if not MIN_KEY < key < MAX_KEY:
        raise ValueError(f"key {key} outside the open range ({MIN_KEY}, {MAX_KEY})")


class OrderedSet:
    """Common inspection helpers; subclasses provide insert/delete/contains."""

    name = "set"

    def keys(self) -> list[int]:
        raise NotImplementedError

    def __len__(self):
        return len(self.keys())

    def check_invariants(self) -> None:
        """Raise AssertionError unless the live keys are strictly ascending."""
        keys = self.keys()
        for a, b in zip(keys, keys[1:]):
            if not a < b:
                raise AssertionError(f"list not strictly sorted at {a}, {b}")


class YieldingLock:
    """Mutex whose waiters poll and yield instead of blocking in the kernel.

    A blocked ``threading.Lock`` waiter is woken on release, but the releasing
    thread still holds the interpreter lock and usually re-acquires the mutex
    first, so a hot lock (the head sentinel's) can starve a waiter for
    seconds. Polling gives the waiter a fair chance whenever it is scheduled.
    """

    __slots__ = ("_lock",)

    def __init__(self):
        self._lock = _allocate_lock()

    def __enter__(self):
        if not self._lock.acquire(False):
            acquire = self._lock.acquire
            delay = 0.0
            while not acquire(False):
                _sleep(delay)
                # Back off so the holder gets the interpreter and can release.
                delay = min(1e-3, delay * 2 if delay else 2e-5)
        return self

    def __exit__(self, *exc):
        self._lock.release()

    def locked(self) -> bool:
        return self._lock.locked()
