import json

import pytest

from nbrsmr import Lifecycle, PoisonDetected, Record, SMRConfig, ScriptError, make_reclaimer
from nbrsmr.validation.interleave import (
    CANNED,
    RGP_TRACE_BROKEN,
    RGP_TRACE_REPAIRED,
    UNRESERVED_WRITE_BROKEN,
    UNRESERVED_WRITE_REPAIRED,
    main,
    parse_script,
    run_interleaving,
)
from nbrsmr.validation.monitor import BoundMonitor, check_garbage_bound
from nbrsmr.validation.quarantine import QuarantineAllocator


def test_rgp_trace_repaired_waits_for_full_broadcast():
    v = run_interleaving(RGP_TRACE_REPAIRED)
    assert v.passed, v.to_json()
    assert [detected for _, _, detected in v.rgp_checks] == [False, True]
    assert v.restarts[3] == 1
    assert v.digests["rec"] == "reclaimed poisoned"


def test_rgp_trace_broken_is_caught():
    v = run_interleaving(RGP_TRACE_BROKEN)
    assert not v.passed
    assert len(v.poison) >= 1


def test_unreserved_write_access_is_caught():
    v = run_interleaving(UNRESERVED_WRITE_BROKEN)
    assert len(v.poison) >= 1
    assert run_interleaving(UNRESERVED_WRITE_REPAIRED).passed


@pytest.mark.parametrize("name", sorted(CANNED))
def test_canned_traces_are_deterministic(name):
    first = run_interleaving(CANNED[name]).to_json()
    second = run_interleaving(CANNED[name]).to_json()
    assert first == second


def test_empty_script_passes():
    assert run_interleaving("").passed
    assert run_interleaving("# only a comment\n").passed


@pytest.mark.parametrize("text", [
    "1 jump",
    "x begin_op",
    "1",
    "set threshold many",
    "set nonsense 3",
    "1 signal two",
    "1 end_read_phase",
])
def test_malformed_scripts_rejected(text):
    with pytest.raises(ScriptError):
        parse_script(text)


def test_semantic_script_errors():
    with pytest.raises(ScriptError):
        run_interleaving("1 read ghost")
    with pytest.raises(ScriptError):
        run_interleaving("set smr ebr\n1 broadcast")
    with pytest.raises(ScriptError):
        run_interleaving("1 rgp_begin")
    with pytest.raises(ScriptError):
        run_interleaving("1 begin_op", SMRConfig(backend="async-interrupt", debug=True))


def test_pair_list_scripts():
    v = run_interleaving([(1, "new a"), (1, "begin_op"), (1, "begin_read"),
                          (1, "read a"), (1, "deref a"), (1, "end_read a"), (1, "end_op")])
    assert v.passed


def test_stale_reference_after_restart_is_flagged():
    v = run_interleaving("""
        1 new a
        1 begin_op
        1 begin_read
        1 read a
        2 broadcast
        1 deref a
        1 deref a
    """)
    assert v.restarts[1] == 1
    assert any("stale" in msg for msg in v.violations)


def test_interleave_cli(capsys):
    assert main(["rgp-repaired"]) == 0
    assert capsys.readouterr().out.strip().endswith("PASS")
    assert main(["rgp-broken", "--json"]) == 1
    assert json.loads(capsys.readouterr().out)["passed"] is False


def test_quarantine_poisons_and_evicts():
    q = QuarantineAllocator(capacity=2)
    recs = [Record() for _ in range(3)]
    for r in recs:
        q.free(r)
    assert all(r.poisoned and r.state is Lifecycle.RECLAIMED for r in recs)
    assert len(q) == 2 and q.released == 1


def test_debug_deref_of_freed_record_raises():
    smr = make_reclaimer("ebr", debug=True)
    ctx = smr.register_thread()
    rec = Record()
    smr.allocator.free(rec)
    with pytest.raises(PoisonDetected):
        smr.deref(ctx, rec)
    assert smr.allocator.poison_count == 1


class _Ctx:
    def __init__(self, tid):
        self.tid = tid


def test_bound_monitor_pass_and_fail():
    m = BoundMonitor(4, 3, 1024)
    m.on_event(_Ctx(0), 10)
    m.sample({0: 500, 1: 1034})
    assert check_garbage_bound(m).passed
    m.on_event(_Ctx(1), 11)
    report = check_garbage_bound(m)
    assert not report.passed and report.post_event_peak == 11
    m2 = BoundMonitor(4, 3, 1024)
    m2.sample({2: 1035})
    assert not check_garbage_bound(m2).passed
    m3 = BoundMonitor(4, 3, 1024)
    m3.record_round(41)
    assert not check_garbage_bound(m3).passed
