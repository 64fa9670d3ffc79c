"""Exception hierarchy shared by every reclaimer and data structure."""


class SMRError(Exception):
    """Base class for reclamation errors."""


class CapacityExceeded(SMRError):
    """The thread registry has no free slot."""


class IllegalTransition(SMRError):
    """A thread moved between execution phases along an edge the phase machine forbids."""


class IllegalLifecycleTransition(SMRError):
    """A record skipped or reversed a lifecycle state (usually retire-before-unlink)."""


class TooManyReservations(SMRError):
    pass


class DoubleRetire(SMRError):
    pass


class ReservationViolation(SMRError):
    """A write phase touched a record it did not reserve (debug builds only)."""


class RestartFromRootViolation(SMRError):
    """A k-NBR read phase did not begin its traversal at the root sentinel."""


class PoisonDetected(SMRError):
    """A thread dereferenced a record that was already reclaimed.

    Raised by the debug read barrier when it sees the quarantine poison word.
    Reaching this is always an SMR bug (or a deliberately broken test trace).
    """

    def __init__(self, record, tid=None, phase=None):
        self.record = record
        self.tid = tid
        self.phase = phase
        super().__init__(f"use-after-free of record {getattr(record, 'rid', '?')} "
                         f"by tid={tid} in phase={phase}")


class UnsupportedCombination(SMRError):
    pass


class InvalidSpec(ValueError):
    pass


class ScriptError(ValueError):
    """An interleaving script contains an unknown or ill-formed step."""


class AllocationFailure(SMRError, MemoryError):
    """Allocation failed inside a write phase; no rollback is attempted."""
