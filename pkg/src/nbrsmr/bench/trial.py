"""Timed benchmark trials."""

from __future__ import annotations

import gc
import random
import threading
import time
from dataclasses import asdict, dataclass, field

from ..config import SMRConfig
from ..errors import PoisonDetected
from ..factory import canonical_smr, check_combination, make_reclaimer, make_set
from ..structures.base import OpKind
from .workload import WorkloadSpec

SAMPLE_INTERVAL = 0.002
STOP_CHECK_EVERY = 32


@dataclass
class TrialMetrics:
    ds: str
    smr: str
    backend: str
    threads: int
    workload: str
    trial: int
    throughput: float
    broadcasts: int
    restarts: int
    peak_unreclaimed: int
    peak_limbo_per_thread: int
    freed_total: int
    retired_total: int = 0
    unreclaimed_end: int = 0
    ops: int = 0
    elapsed: float = 0.0
    poison: int = 0
    prefill: int = 0
    inserted: int = 0
    removed: int = 0
    final_size: int = 0
    sorted_unique: bool = True
    per_thread_ops: list = field(default_factory=list)
    unreclaimed_series: list = field(default_factory=list)

    @property
    def size_consistent(self) -> bool:
        return self.final_size == self.prefill + self.inserted - self.removed

    def as_dict(self) -> dict:
        return asdict(self)


class _Worker:
    __slots__ = ("index", "ctx", "ops", "inserted", "removed", "poison", "error")

    def __init__(self, index: int):
        self.index = index
        self.ctx = None
        self.ops = 0
        self.inserted = 0
        self.removed = 0
        self.poison = 0
        self.error = None


def _prefill(structure, reclaimer, spec: WorkloadSpec) -> int:
    ctx = reclaimer.register_thread()
    rng = random.Random(f"{spec.seed}:prefill")
    keys = rng.sample(range(spec.key_range), spec.prefill_count)
    # Descending order makes every insert land next to the head.
    for key in sorted(keys, reverse=True):
        structure.insert(ctx, key)
    reclaimer.unregister_thread(ctx)
    return len(keys)


def _run_worker(w: _Worker, structure, reclaimer, spec: WorkloadSpec,
                start: threading.Barrier, stop: threading.Event, ready: threading.Event):
    try:
        ctx = w.ctx = reclaimer.register_thread()
    except BaseException as exc:  # noqa: BLE001 - surfaced to the driver
        w.error = exc
        start.abort()
        return
    ctx.pause_event = stop
    rng = random.Random(f"{spec.seed}:{w.index}")
    rand = rng.random
    randrange = rng.randrange
    key_range = spec.key_range
    ins_cut = spec.insert_pct / 100.0
    del_cut = (spec.insert_pct + spec.delete_pct) / 100.0
    insert, delete, contains = structure.insert, structure.delete, structure.contains
    budget = spec.ops_per_thread
    stall = spec.stall if spec.stall is not None and spec.stall.tid == w.index else None
    inserted_kind, removed_kind = OpKind.INSERTED, OpKind.REMOVED
    ops = inserted = removed = 0
    try:
        start.wait()
    except threading.BrokenBarrierError:
        return
    if stall is not None and stall.seconds > 0:
        if stall.phase == "quiescent":
            stop.wait(stall.seconds)
        else:
            ctx.pause_until = time.monotonic() + stall.seconds
    try:
        while True:
            if ops % STOP_CHECK_EVERY == 0 and stop.is_set():
                break
            if budget is not None and ops >= budget:
                break
            r = rand()
            key = randrange(key_range)
            try:
                if r < ins_cut:
                    if insert(ctx, key).kind is inserted_kind:
                        inserted += 1
                elif r < del_cut:
                    if delete(ctx, key).kind is removed_kind:
                        removed += 1
                else:
                    contains(ctx, key)
            except PoisonDetected:
                w.poison += 1
                reclaimer.abort_op(ctx)
            ops += 1
    except BaseException as exc:  # noqa: BLE001 - surfaced to the driver
        w.error = exc
        reclaimer.abort_op(ctx)
    finally:
        w.ops, w.inserted, w.removed = ops, inserted, removed
        ready.set()


def run_trial(spec: WorkloadSpec, ds: str, smr: str, config: SMRConfig | None = None,
              trial: int = 0, monitor=None) -> TrialMetrics:
    """Prefill, run ``spec.threads`` workers for the duration, drain, report."""
    smr = canonical_smr(smr)
    check_combination(ds, smr)
    config = config or SMRConfig()
    reclaimer = make_reclaimer(smr, config)
    if monitor is not None:
        reclaimer.monitor = monitor
    structure = make_set(ds, reclaimer)
    prefill = _prefill(structure, reclaimer, spec)

    workers = [_Worker(i) for i in range(spec.threads)]
    start = threading.Barrier(spec.threads + 1)
    stop = threading.Event()
    done = [threading.Event() for _ in workers]
    threads = [
        threading.Thread(target=_run_worker, name=f"bench-{w.index}",
                         args=(w, structure, reclaimer, spec, start, stop, done[w.index]),
                         daemon=True)
        for w in workers
    ]
    for t in threads:
        t.start()

    peak = 0
    peak_limbo = 0
    series = []
    gc_was_enabled = gc.isenabled()
    gc.disable()
    try:
        try:
            start.wait()
        except threading.BrokenBarrierError:
            pass
        began = time.perf_counter()
        deadline = began + spec.duration if spec.ops_per_thread is None else None
        while True:
            now = time.perf_counter()
            contexts = [w.ctx for w in workers if w.ctx is not None]
            unreclaimed = sum(c.retired - c.freed for c in contexts)
            if unreclaimed > peak:
                peak = unreclaimed
            limbo = max((reclaimer.limbo_size(c) for c in contexts), default=0)
            if limbo > peak_limbo:
                peak_limbo = limbo
            series.append((now - began, unreclaimed))
            if monitor is not None:
                monitor.sample({c.tid: reclaimer.limbo_size(c) for c in contexts})
            if all(d.is_set() for d in done):
                break
            if deadline is not None and now >= deadline:
                stop.set()
                for d in done:
                    d.wait()
                break
            time.sleep(SAMPLE_INTERVAL)
        elapsed = time.perf_counter() - began
        stop.set()
        for t in threads:
            t.join()
    finally:
        if gc_was_enabled:
            gc.enable()

    errors = [w.error for w in workers if w.error is not None]
    if errors:
        raise RuntimeError(f"worker failed: {errors[0]!r}") from errors[0]

    contexts = [w.ctx for w in workers]
    retired = sum(c.retired for c in contexts)
    freed = sum(c.freed for c in contexts)
    for c in contexts:
        peak_limbo = max(peak_limbo, c.peak_limbo)
    peak = max(peak, retired - freed)
    ops = sum(w.ops for w in workers)
    keys = structure.keys()
    metrics = TrialMetrics(
        ds=ds, smr=smr, backend=config.backend, threads=spec.threads,
        workload=spec.label, trial=trial,
        throughput=ops / elapsed if elapsed > 0 else 0.0,
        broadcasts=sum(c.broadcasts for c in contexts),
        restarts=sum(c.restarts for c in contexts),
        peak_unreclaimed=peak,
        peak_limbo_per_thread=peak_limbo,
        freed_total=freed,
        retired_total=retired,
        unreclaimed_end=retired - freed,
        ops=ops,
        elapsed=elapsed,
        poison=max(len(reclaimer.allocator.detections), sum(w.poison for w in workers)),
        prefill=prefill,
        inserted=sum(w.inserted for w in workers),
        removed=sum(w.removed for w in workers),
        final_size=len(keys),
        sorted_unique=all(a < b for a, b in zip(keys, keys[1:])),
        per_thread_ops=[w.ops for w in workers],
        unreclaimed_series=series,
    )
    for c in contexts:
        reclaimer.unregister_thread(c)
    return metrics
