"""Reclaimer configuration.

Every knob has a default; ``NBRSMR_BACKEND`` and ``NBRSMR_DEBUG`` override the
backend and debug toggle so test runs can flip them without code changes.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

BACKENDS = ("cooperative", "async-interrupt")


def _env_flag(name: str) -> bool | None:
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return None
    return raw.strip().lower() in ("1", "true", "yes", "on")


@dataclass(frozen=True)
class SMRConfig:
    """Tunables for all reclaimers.

    Attributes:
        threshold: limbo-bag size S (records) that triggers a reclamation event.
        max_reservations: R, reservations a write phase may publish.
        lo_fraction: NBR+ low watermark as a fraction of ``threshold``.
        scan_every: NBR+ re-reads announce clocks every this many lo-path retires.
        backend: neutralization backend, ``cooperative`` or ``async-interrupt``.
        debug: enable quarantine poisoning, lifecycle and phase assertions.
        quarantine_capacity: blocks held in quarantine before real release.
        clear_on_end_op: drop reservations at end_op instead of the next read phase.
        capacity: registry size N (max concurrently registered threads).
        hp_slots: hazard pointers per thread.
        hp_threshold: retired-list size that triggers a hazard-pointer scan;
            ``None`` means use ``threshold``.
    """

    threshold: int = 32768
    max_reservations: int = 3
    lo_fraction: float = 0.5
    scan_every: int = 64
    backend: str = "cooperative"
    debug: bool = False
    quarantine_capacity: int = 1 << 20
    clear_on_end_op: bool = False
    capacity: int = 64
    hp_slots: int = 3
    hp_threshold: int | None = None

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}; expected one of {BACKENDS}")
        if self.max_reservations >= self.threshold:
            raise ValueError("max_reservations must be strictly less than threshold")
        if not 0.0 < self.lo_fraction <= 1.0:
            raise ValueError("lo_fraction must lie in (0, 1]")
        if self.scan_every < 1 or self.capacity < 1:
            raise ValueError("scan_every and capacity must be positive")

    @property
    def lo_threshold(self) -> int:
        return max(1, int(self.threshold * self.lo_fraction))

    @property
    def hp_scan_threshold(self) -> int:
        return self.threshold if self.hp_threshold is None else self.hp_threshold

    def with_env(self) -> "SMRConfig":
        """Return a copy with environment overrides applied."""
        changes = {}
        backend = os.environ.get("NBRSMR_BACKEND")
        if backend:
            changes["backend"] = backend
        debug = _env_flag("NBRSMR_DEBUG")
        if debug is not None:
            changes["debug"] = debug
        return replace(self, **changes) if changes else self
