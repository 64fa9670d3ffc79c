"""Acceptance suite: every primary criterion, each printing one PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the per-criterion lines
also appear in the terminal summary.
"""

import random
import statistics
import threading

from nbrsmr import OpKind, Phase, SMRConfig, make_reclaimer, make_set, normalize, rgp_detected
from nbrsmr.bench.trial import run_trial
from nbrsmr.bench.workload import Stall, WorkloadSpec
from nbrsmr.validation.faults import FaultInjector
from nbrsmr.validation.interleave import (
    RGP_TRACE_BROKEN,
    RGP_TRACE_REPAIRED,
    UNRESERVED_WRITE_BROKEN,
    run_interleaving,
)
from nbrsmr.validation.monitor import global_bound

# n*(S + R*(n-1) + 1) for n=8, R=3, S=1024, computed by hand.
BOUND_P8_R3_S1024 = 8368

SAFETY_CONFIGS = [("lazylist", s) for s in ("nbr", "nbrplus", "ebr", "hp")] + \
                 [("harrislist", s) for s in ("nbr", "nbrplus", "ebr")]
ALL_COMBOS = [("lazylist", s) for s in ("nbr", "nbrplus", "ebr", "hp", "leaky")] + \
             [("harrislist", s) for s in ("nbr", "nbrplus", "ebr", "leaky")]


def test_criterion_1_safety_under_stress(criterion):
    # Debug throughput is a few thousand ops/s, so a small threshold makes
    # reclamation events frequent enough to exercise the handshakes.
    cfg = SMRConfig(debug=True, backend="cooperative", threshold=64)
    spec = WorkloadSpec(50, 50, 0, key_range=2048, threads=8, duration=10.0)
    results = []
    for ds, smr in SAFETY_CONFIGS:
        m = run_trial(spec, ds, smr, cfg)
        results.append((ds, smr, m.poison, m.freed_total))
    ok = all(p == 0 and f > 0 for _, _, p, f in results)
    detail = ", ".join(f"{d}/{s} poison={p} freed={f}" for d, s, p, f in results)
    assert criterion.report(1, "zero poison detections", ok, detail)


def test_criterion_2_detector_power(criterion):
    counts = {}
    for name, trace in (("unreserved-write", UNRESERVED_WRITE_BROKEN),
                        ("rgp-skipped", RGP_TRACE_BROKEN)):
        counts[name] = [len(run_interleaving(trace).poison) for _ in range(5)]
    ok = all(min(c) >= 1 and len(set(c)) == 1 for c in counts.values())
    detail = ", ".join(f"{n} poison per run={c}" for n, c in counts.items())
    assert criterion.report(2, "broken traces caught", ok, detail)


def test_criterion_3_bounded_garbage_with_stalled_reader(criterion):
    p, r, s = 8, 3, 1024
    assert global_bound(p, r, s) == BOUND_P8_R3_S1024
    cfg = SMRConfig(threshold=s, max_reservations=r)
    # A small key range keeps deletes, and therefore retires, frequent.
    spec = WorkloadSpec(50, 50, 0, key_range=16, threads=p, duration=5.0,
                        stall=Stall(0, 5.0, "read"))
    peaks = {smr: run_trial(spec, "lazylist", smr, cfg).peak_unreclaimed
             for smr in ("nbrplus", "hp", "ebr")}
    ok = (peaks["nbrplus"] <= BOUND_P8_R3_S1024 and peaks["hp"] <= BOUND_P8_R3_S1024
          and peaks["ebr"] > 10 * BOUND_P8_R3_S1024)
    detail = (f"bound={BOUND_P8_R3_S1024} nbrplus={peaks['nbrplus']} hp={peaks['hp']} "
              f"ebr={peaks['ebr']} (needs > {10 * BOUND_P8_R3_S1024})")
    assert criterion.report(3, "bounded garbage", ok, detail)


def test_criterion_4_signal_economy(criterion):
    ratios, freed = [], []
    for trial in range(3):
        # Fixed per-thread operation budget so both schemes retire the same work.
        spec = WorkloadSpec(50, 50, 0, key_range=16, threads=8, ops_per_thread=100_000,
                            seed=1 + trial)
        nbr = run_trial(spec, "lazylist", "nbr", SMRConfig(threshold=1024))
        plus = run_trial(spec, "lazylist", "nbrplus", SMRConfig(threshold=1024, lo_fraction=0.5))
        ratios.append(plus.broadcasts / nbr.broadcasts)
        freed.append(plus.freed_total / nbr.freed_total)
    b, f = statistics.median(ratios), statistics.median(freed)
    ok = b <= 0.6 and f >= 0.9
    detail = (f"median broadcast ratio={b:.3f} (<= 0.6), median freed ratio={f:.3f} (>= 0.9), "
              f"trials={[round(x, 3) for x in ratios]}")
    assert criterion.report(4, "signal economy", ok, detail)


def test_criterion_5_rgp_predicate(criterion):
    examples = [
        (([4, 2, 6], [6, 2, 6]), True),
        (([4, 2, 6], [5, 3, 7]), False),
        ((normalize([5]), [7]), False),
        ((normalize([5]), [8]), True),
    ]
    got = [rgp_detected(*args) for args, _ in examples]
    table_ok = got == [want for _, want in examples] and normalize([5]) == [6]
    v = run_interleaving(RGP_TRACE_REPAIRED)
    checks = [d for _, _, d in v.rgp_checks]
    trace_ok = v.passed and checks == [False, True]
    ok = table_ok and trace_ok
    detail = f"examples={got}, three-thread trace passed={v.passed} lo_checks={checks}"
    assert criterion.report(5, "rgp predicate", ok, detail)


def _oracle(ds, smr):
    reclaimer = make_reclaimer(smr, threshold=16, debug=True)
    s = make_set(ds, reclaimer)
    ctx = reclaimer.register_thread()
    rng = random.Random(f"oracle-{ds}-{smr}")
    model = set()
    for _ in range(5000):
        key = rng.randrange(128)
        op = rng.randrange(3)
        if op == 0:
            want = OpKind.DUPLICATE if key in model else OpKind.INSERTED
            model.add(key)
            got = s.insert(ctx, key).kind
        elif op == 1:
            want = OpKind.REMOVED if key in model else OpKind.ABSENT
            model.discard(key)
            got = s.delete(ctx, key).kind
        else:
            want = OpKind.FOUND if key in model else OpKind.NOT_FOUND
            got = s.contains(ctx, key).kind
        if got is not want:
            return False
    return s.keys() == sorted(model)


def test_criterion_6_set_semantics(criterion):
    failures = []
    runs = [(ds, smr, "cooperative") for ds, smr in ALL_COMBOS]
    runs += [(ds, smr, "async-interrupt") for ds in ("lazylist", "harrislist")
             for smr in ("nbr", "nbrplus")]
    for ds, smr, backend in runs:
        spec = WorkloadSpec(50, 50, 0, key_range=256, threads=8, duration=2.0)
        m = run_trial(spec, ds, smr, SMRConfig(threshold=256, backend=backend))
        if not (m.sorted_unique and m.size_consistent):
            failures.append(f"{ds}/{smr}/{backend} size={m.final_size} "
                            f"expected={m.prefill + m.inserted - m.removed}")
    for ds, smr in ALL_COMBOS:
        if not _oracle(ds, smr):
            failures.append(f"{ds}/{smr} sequential oracle mismatch")
    ok = not failures
    detail = (f"{len(runs)} concurrent runs and {len(ALL_COMBOS)} sequential oracles"
              + ("" if ok else "; " + "; ".join(failures)))
    assert criterion.report(6, "set semantics", ok, detail)


class _Perturber:
    """In write phases, lets another context slip in an insert that makes the
    pending compare-and-swap fail; in read phases, delegates to the injector."""

    def __init__(self, s, other, keys, injector):
        self.s, self.other, self.keys, self.injector = s, other, list(keys), injector

    def __call__(self, ctx, rec):
        if ctx.phase is Phase.WRITE and self.keys:
            saved, ctx.fault = ctx.fault, None
            try:
                self.s.insert(self.other, self.keys.pop(0))
            finally:
                ctx.fault = saved
            return
        self.injector(ctx, rec)


def _scripted_harris_insert(smr):
    reclaimer = make_reclaimer(smr, debug=True, threshold=64)
    s = make_set("harrislist", reclaimer)
    ctx, other = reclaimer.register_thread(), reclaimer.register_thread()
    for k in (40, 30, 20, 10):
        s.insert(ctx, k)
    node = s.head.next[0]
    while node.key != 20:
        node = node.next[0]
    node.next = (node.next[0], True)
    inj = FaultInjector(at_deref=2).attach(ctx)
    ctx.fault = _Perturber(s, other, [24, 23, 26], inj)
    got = s.insert(ctx, 25)
    ctx.fault = None
    return (got.kind is OpKind.INSERTED and s.keys() == [10, 23, 24, 25, 26, 30, 40]
            and got.restarts >= inj.injections and inj.injected == [1, 2, 3]
            and s.root_violations == 0), inj.injections, got.restarts


def _concurrent_harris_injection():
    reclaimer = make_reclaimer("nbr", debug=True, threshold=32)
    s = make_set("harrislist", reclaimer)
    stats, errors = [], []
    lock = threading.Lock()

    def worker(seed):
        try:
            ctx = reclaimer.register_thread()
            inj = FaultInjector(at_deref=3).attach(ctx)
            rng = random.Random(seed)
            ins = rem = 0
            for _ in range(1500):
                key = rng.randrange(32)
                if rng.random() < 0.5:
                    ins += s.insert(ctx, key).kind is OpKind.INSERTED
                else:
                    rem += s.delete(ctx, key).kind is OpKind.REMOVED
            with lock:
                stats.append((ins, rem, inj.injections, ctx.restarts))
        except BaseException as exc:  # noqa: BLE001
            errors.append(exc)

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    size_ok = len(s.keys()) == sum(x[0] for x in stats) - sum(x[1] for x in stats)
    ok = (not errors and size_ok and reclaimer.allocator.poison_count == 0
          and s.root_violations == 0 and all(r >= i for _, _, i, r in stats))
    return ok, sum(x[2] for x in stats), sum(x[3] for x in stats)


def test_criterion_7_knbr_restart_discipline(criterion):
    results = {smr: _scripted_harris_insert(smr) for smr in ("nbr", "nbrplus")}
    results["concurrent"] = _concurrent_harris_injection()
    ok = all(r[0] for r in results.values())
    detail = ", ".join(f"{k}: injections={i} restarts={r}" for k, (_, i, r) in results.items())
    assert criterion.report(7, "k-phase restart discipline", ok, detail)


def test_criterion_8_relative_performance(criterion):
    spec = WorkloadSpec(5, 5, 90, key_range=2048, threads=8, duration=4.0)
    plus = [run_trial(spec, "lazylist", "nbrplus",
                      SMRConfig(backend="async-interrupt"), trial=t).throughput
            for t in range(3)]
    hp = [run_trial(spec, "lazylist", "hp", SMRConfig(), trial=t).throughput for t in range(3)]
    a, b = statistics.median(plus), statistics.median(hp)
    ok = a >= b
    detail = f"median ops/s nbrplus={a:.0f} hp={b:.0f} ({a / b:.2f}x)"
    assert criterion.report(8, "nbrplus at least as fast as hp", ok, detail)
