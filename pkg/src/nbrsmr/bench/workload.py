"""Workload description: operation mix, key range, duration, stall."""

from __future__ import annotations

from dataclasses import dataclass, replace

from ..errors import InvalidSpec

PROFILES = {
    "update": (50, 50, 0),
    "middle": (25, 25, 50),
    "search": (5, 5, 90),
}
PROFILE_ALIASES = {
    "update-intensive": "update",
    "search-intensive": "search",
    "mixed": "middle",
}
STALL_PHASES = ("read", "quiescent")


@dataclass(frozen=True)
class Stall:
    """Park worker ``tid`` for ``seconds`` once, at its first operation."""

    tid: int = 0
    seconds: float = 0.0
    phase: str = "read"


@dataclass(frozen=True)
class WorkloadSpec:
    insert_pct: int = 50
    delete_pct: int = 50
    search_pct: int = 0
    key_range: int = 2048
    duration: float = 5.0
    threads: int = 4
    prefill: int | None = None
    seed: int = 1
    stall: Stall | None = None
    ops_per_thread: int | None = None

    def __post_init__(self):
        pcts = (self.insert_pct, self.delete_pct, self.search_pct)
        if any(p < 0 for p in pcts) or sum(pcts) != 100:
            raise InvalidSpec(f"operation percentages {pcts} must be non-negative and sum to 100")
        if self.key_range < 1:
            raise InvalidSpec("key_range must be positive")
        if self.threads < 1:
            raise InvalidSpec("threads must be positive")
        if self.duration <= 0 and self.ops_per_thread is None:
            raise InvalidSpec("duration must be positive unless ops_per_thread is set")
        if self.prefill is not None and not 0 <= self.prefill <= self.key_range:
            raise InvalidSpec("prefill must lie in [0, key_range]")
        if self.ops_per_thread is not None and self.ops_per_thread < 0:
            raise InvalidSpec("ops_per_thread must be non-negative")
        if self.stall is not None:
            if not 0 <= self.stall.tid < self.threads:
                raise InvalidSpec(f"stall tid {self.stall.tid} is not a worker index")
            if self.stall.phase not in STALL_PHASES:
                raise InvalidSpec(f"stall phase must be one of {STALL_PHASES}")
            if self.stall.seconds < 0:
                raise InvalidSpec("stall seconds must be non-negative")

    @property
    def prefill_count(self) -> int:
        return self.key_range // 2 if self.prefill is None else self.prefill

    @property
    def label(self) -> str:
        text = f"{self.insert_pct}:{self.delete_pct}:{self.search_pct}"
        if self.stall is not None and self.stall.seconds > 0:
            text += "+stall"
        return text

    def with_threads(self, threads: int) -> "WorkloadSpec":
        return replace(self, threads=threads)


def parse_mix(text: str) -> tuple[int, int, int]:
    """Parse ``i:d:s`` or a profile name into percentages."""
    name = PROFILE_ALIASES.get(text, text)
    if name in PROFILES:
        return PROFILES[name]
    parts = text.split(":")
    if len(parts) != 3:
        raise InvalidSpec(f"workload {text!r} is neither i:d:s nor one of {sorted(PROFILES)}")
    try:
        return tuple(int(p) for p in parts)  # type: ignore[return-value]
    except ValueError:
        raise InvalidSpec(f"workload {text!r} has a non-integer percentage") from None


def parse_stall(text: str, duration: float) -> Stall:
    """Parse ``tid:secs[:phase]``; ``secs`` may be ``full`` for the whole trial."""
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise InvalidSpec(f"stall {text!r} must look like tid:secs[:phase]")
    try:
        tid = int(parts[0])
        secs = duration if parts[1] == "full" else float(parts[1])
    except ValueError:
        raise InvalidSpec(f"stall {text!r} has a malformed number") from None
    phase = parts[2] if len(parts) == 3 else "read"
    return Stall(tid, secs, phase)
