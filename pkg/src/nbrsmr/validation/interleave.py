"""Deterministic interleavings of reclaimer steps across real threads.

A script is plain text, one step per line::

    # comment
    set smr nbrplus          # reclaimer (nbr, nbrplus, ebr, hp, leaky)
    set threshold 64         # any SMRConfig field
    3 begin_op
    3 begin_read
    3 read rec               # take a private reference to shared record "rec"
    2 unlink rec
    2 retire rec
    1 signal 3               # deliver one neutralization request to thread 3
    3 deref rec              # guarded dereference of the private reference

Every thread label gets its own worker thread, registered in ascending label
order. The driver hands one step at a time to the named worker and waits for
it to finish, so the schedule is exactly the script order. A step that gets
neutralized restarts its thread's read phase (the checkpoint), and private
references from the abandoned read phase become stale: using one is
reported as a violation (and still dereferenced, so a use-after-free shows up).

Steps (``T`` is the acting thread label):

``begin_op``, ``end_op``, ``begin_read``, ``end_read [NAME...]``
    phase boundaries; ``end_read`` reserves the named private references
``new NAME``
    allocate a shared, reachable record
``read NAME`` / ``deref NAME``
    take a private reference / dereference it through the read barrier
``unlink NAME``, ``retire NAME``, ``fill N``
    unlink a shared record, retire it, or retire N fresh filler records
``broadcast``, ``signal U``, ``reclaim``, ``event``
    neutralize everyone, neutralize U only, free unreserved bag entries,
    full threshold-triggered reclamation event
``rgp_begin``, ``rgp_end``, ``lo_enter``, ``lo_check``, ``reclaim_bookmark``
    NBR+ steps: bracket a broadcast on the announce clock, take the
    low-watermark snapshot, test for a grace period (reclaiming up to the
    bookmark only if one is detected), or reclaim up to the bookmark
    unconditionally (the broken variant)
"""

from __future__ import annotations

import argparse
import json
import queue
import sys
import threading
from dataclasses import dataclass, field, fields, replace
from operator import attrgetter

from ..config import SMRConfig
from ..core import Lifecycle, Phase, Record
from ..errors import PoisonDetected, ScriptError, SMRError
from ..factory import make_reclaimer
from ..neutralization import Neutralized

STEP_TIMEOUT = 10.0

# op name -> (min args, max args); None means unbounded
STEPS = {
    "begin_op": (0, 0), "end_op": (0, 0), "begin_read": (0, 0), "end_read": (0, None),
    "new": (1, 1), "read": (1, 1), "deref": (1, 1), "unlink": (1, 1), "retire": (1, 1),
    "fill": (1, 1), "broadcast": (0, 0), "signal": (1, 1), "reclaim": (0, 0),
    "event": (0, 0), "rgp_begin": (0, 0), "rgp_end": (0, 0), "lo_enter": (0, 0),
    "lo_check": (0, 0), "reclaim_bookmark": (0, 0),
}
NBRPLUS_ONLY = {"rgp_begin", "rgp_end", "lo_enter", "lo_check", "reclaim_bookmark"}
NEUTRALIZING_ONLY = {"signal", "broadcast", "reclaim"}


class ScriptRecord(Record):
    __slots__ = ("name", "value")
    _get = attrgetter("name", "value")

    def __init__(self, name: str):
        Record.__init__(self)
        self.name = name
        self.value = 0

    def scrub(self):
        self.name = None
        self.value = None


@dataclass(frozen=True)
class Step:
    line: int
    tid: int
    op: str
    args: tuple


@dataclass
class Script:
    settings: dict
    steps: list


@dataclass
class TraceVerdict:
    poison: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    restarts: dict = field(default_factory=dict)
    freed: dict = field(default_factory=dict)
    rgp_checks: list = field(default_factory=list)
    digests: dict = field(default_factory=dict)
    log: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.poison and not self.violations

    def to_json(self) -> dict:
        return {
            "passed": self.passed, "poison": self.poison, "violations": self.violations,
            "restarts": self.restarts, "freed": self.freed, "rgp_checks": self.rgp_checks,
            "digests": self.digests, "log": self.log,
        }


_CONFIG_FIELDS = {f.name: f.type for f in fields(SMRConfig)}


def _coerce(key: str, value: str):
    if key == "smr":
        return value
    if key not in _CONFIG_FIELDS:
        raise ScriptError(f"unknown setting {key!r}")
    if key == "backend":
        return value
    if key in ("debug", "clear_on_end_op"):
        return value.lower() in ("1", "true", "yes", "on")
    if key == "lo_fraction":
        return float(value)
    try:
        return int(value)
    except ValueError:
        raise ScriptError(f"setting {key} expects an integer, got {value!r}") from None


def parse_script(text: str) -> Script:
    settings: dict = {}
    steps: list[Step] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "set":
            if len(parts) != 3:
                raise ScriptError(f"line {lineno}: 'set' takes a key and a value")
            settings[parts[1]] = _coerce(parts[1], parts[2])
            continue
        try:
            tid = int(parts[0])
        except ValueError:
            raise ScriptError(f"line {lineno}: expected a thread label, got {parts[0]!r}") from None
        if len(parts) < 2:
            raise ScriptError(f"line {lineno}: missing step name")
        op, args = parts[1], tuple(parts[2:])
        if op not in STEPS:
            raise ScriptError(f"line {lineno}: unknown step {op!r}")
        lo, hi = STEPS[op]
        if len(args) < lo or (hi is not None and len(args) > hi):
            raise ScriptError(f"line {lineno}: wrong number of arguments for {op}")
        if op in ("signal", "fill"):
            try:
                args = (int(args[0]),)
            except ValueError:
                raise ScriptError(f"line {lineno}: {op} expects an integer") from None
        steps.append(Step(lineno, tid, op, args))
    return Script(settings, steps)


class _Worker:
    """A parked thread that executes steps handed to it by the driver."""

    def __init__(self, label: int, runner: "_Runner"):
        self.label = label
        self.runner = runner
        self.inbox: queue.Queue = queue.Queue()
        self.ctx = None
        self.locals: dict[str, tuple] = {}
        self.registered = threading.Event()
        self.thread = threading.Thread(target=self._main, name=f"script-{label}", daemon=True)

    def _main(self):
        self.ctx = self.runner.smr.register_thread()
        self.registered.set()
        while True:
            step = self.inbox.get()
            if step is None:
                return
            try:
                outcome = self.runner.execute(self, step)
            except BaseException as exc:  # noqa: BLE001 - forwarded to the driver
                outcome = exc
            self.runner.done.put(outcome)


class _Runner:
    def __init__(self, script: Script, config: SMRConfig | None):
        settings = dict(script.settings)
        smr_name = settings.pop("smr", "nbr")
        base = config or SMRConfig(debug=True, threshold=64)
        if settings:
            base = replace(base, **settings)
        if base.backend != "cooperative":
            raise ScriptError("interleavings require the cooperative backend")
        self.smr = make_reclaimer(smr_name, base)
        self.shared: dict[str, ScriptRecord] = {}
        self.names: dict[int, str] = {}
        self.fillers = 0
        self.verdict = TraceVerdict()
        self.done: queue.Queue = queue.Queue()
        self.workers: dict[int, _Worker] = {}
        self._lock = threading.Lock()

    # -- helpers --------------------------------------------------------------
    def _shared(self, name: str, step: Step) -> ScriptRecord:
        rec = self.shared.get(name)
        if rec is None:
            raise ScriptError(f"line {step.line}: no shared record named {name!r}")
        return rec

    def _local(self, w: _Worker, name: str, step: Step):
        if name not in w.locals:
            raise ScriptError(f"line {step.line}: thread {w.label} holds no reference {name!r}")
        rec, gen = w.locals[name]
        if gen != w.ctx.read_gen:
            self.verdict.violations.append(
                f"line {step.line}: thread {w.label} used stale reference {name!r} "
                f"from an abandoned read phase")
        return rec

    def _require(self, op: str, step: Step):
        if op in NBRPLUS_ONLY and not hasattr(self.smr, "announce"):
            raise ScriptError(f"line {step.line}: {op} needs smr nbrplus")
        if op in NEUTRALIZING_ONLY and not self.smr.neutralizing:
            raise ScriptError(f"line {step.line}: {op} needs a neutralizing reclaimer")

    def _restart(self, w: _Worker, step: Step):
        """Land on the checkpoint: restart the read phase from its beginning."""
        smr = self.smr
        smr._restarted(w.ctx)
        smr.begin_read_phase(w.ctx)
        self.verdict.log.append(f"line {step.line}: thread {w.label} neutralized, read phase restarted")

    # -- step execution (runs on the worker thread) --------------------------------
    def execute(self, w: _Worker, step: Step):
        smr = self.smr
        ctx = w.ctx
        op, args = step.op, step.args
        self._require(op, step)
        try:
            if op == "begin_op":
                smr.begin_op(ctx)
            elif op == "end_op":
                smr.end_op(ctx)
            elif op == "begin_read":
                smr.begin_read_phase(ctx)
            elif op == "end_read":
                recs = tuple(self._local(w, n, step) for n in args)
                smr.end_read_phase(ctx, recs)
            elif op == "new":
                with self._lock:
                    if args[0] in self.shared:
                        raise ScriptError(f"line {step.line}: record {args[0]!r} already exists")
                    rec = ScriptRecord(args[0])
                    rec.state = Lifecycle.REACHABLE
                    self.shared[args[0]] = rec
                    self.names[rec.rid] = args[0]
            elif op == "read":
                rec = self._shared(args[0], step)
                if rec.state != Lifecycle.REACHABLE:
                    raise ScriptError(
                        f"line {step.line}: {args[0]!r} is not reachable, so no traversal can find it")
                w.locals[args[0]] = (rec, ctx.read_gen)
            elif op == "deref":
                rec = self._local(w, args[0], step)
                smr.deref(ctx, rec)
            elif op == "unlink":
                rec = self._shared(args[0], step)
                if rec.state != Lifecycle.REACHABLE:
                    raise ScriptError(f"line {step.line}: {args[0]!r} is not reachable")
                rec.state = Lifecycle.UNLINKED
            elif op == "retire":
                smr.retire(ctx, self._shared(args[0], step))
            elif op == "fill":
                for _ in range(args[0]):
                    with self._lock:
                        self.fillers += 1
                        rec = ScriptRecord(f"~filler{self.fillers}")
                    rec.state = Lifecycle.UNLINKED
                    smr.retire(ctx, rec)
            elif op == "broadcast":
                smr.signal_all(ctx)
            elif op == "signal":
                target = self.workers.get(args[0])
                if target is None:
                    raise ScriptError(f"line {step.line}: no thread labelled {args[0]}")
                smr.backend.signal(ctx, target.ctx)
            elif op == "reclaim":
                smr.reclaim_freeable(ctx, ctx.limbo.tail())
            elif op == "event":
                smr.reclamation_event(ctx)
            elif op == "rgp_begin":
                smr.rgp_begin(ctx)
            elif op == "rgp_end":
                smr.rgp_end(ctx)
            elif op == "lo_enter":
                smr.lo_enter(ctx)
            elif op == "lo_check":
                detected = smr.lo_check(ctx)
                self.verdict.rgp_checks.append((w.label, step.line, detected))
                if detected:
                    smr.reclaim_to_bookmark(ctx)
            elif op == "reclaim_bookmark":
                smr.reclaim_to_bookmark(ctx)
            self.verdict.log.append(f"line {step.line}: thread {w.label} {op} {' '.join(map(str, args))}".rstrip())
        except Neutralized:
            self._restart(w, step)
        except PoisonDetected as exc:
            name = self.names.get(exc.record.rid, "a filler record")
            msg = f"thread {w.label} used freed record {name!r} in its {exc.phase} phase"
            self.verdict.poison.append(f"line {step.line}: {msg}")
            self.verdict.log.append(f"line {step.line}: POISON {msg}")
        except ScriptError:
            raise
        except SMRError as exc:
            self.verdict.violations.append(f"line {step.line}: {type(exc).__name__}: {exc}")
        return None

    # -- driver -------------------------------------------------------------------
    def run(self, script: Script) -> TraceVerdict:
        labels = sorted({s.tid for s in script.steps})
        for label in labels:
            w = _Worker(label, self)
            self.workers[label] = w
            w.thread.start()
            w.registered.wait()
        try:
            for step in script.steps:
                self.workers[step.tid].inbox.put(step)
                try:
                    outcome = self.done.get(timeout=STEP_TIMEOUT)
                except queue.Empty:
                    raise ScriptError(f"line {step.line}: step did not finish (deadlock?)") from None
                if isinstance(outcome, BaseException):
                    raise outcome
        finally:
            for w in self.workers.values():
                w.inbox.put(None)
            for w in self.workers.values():
                w.thread.join(STEP_TIMEOUT)
        v = self.verdict
        for label, w in self.workers.items():
            v.restarts[label] = w.ctx.restarts
            v.freed[label] = w.ctx.freed
        for name, rec in sorted(self.shared.items()):
            v.digests[name] = rec.state.name.lower() + (" poisoned" if rec.poisoned else "")
        return v


def run_interleaving(script, config: SMRConfig | None = None) -> TraceVerdict:
    """Execute ``script`` (text, :class:`Script`, or list of (tid, step) pairs)."""
    if isinstance(script, str):
        script = parse_script(script)
    elif not isinstance(script, Script):
        lines = []
        for tid, step in script:
            lines.append(f"{tid} {step}")
        script = parse_script("\n".join(lines))
    if not script.steps:
        return TraceVerdict()
    return _Runner(script, config).run(script)


# Thread 3 holds a private reference to a record in thread 2's bag while
# thread 1 broadcasts. Thread 2 may free its bag only after thread 1 has
# neutralized everyone, which it detects through thread 1's announce clock.
RGP_TRACE = """\
set smr nbrplus
set threshold 64
set lo_fraction 0.5
2 new rec
3 begin_op
3 begin_read
3 read rec
3 deref rec
2 begin_op
2 begin_read
2 read rec
2 end_read rec
2 unlink rec
2 retire rec
2 end_op
2 lo_enter
1 rgp_begin
1 signal 2
{middle}
3 deref rec
1 signal 3
1 reclaim
1 rgp_end
3 deref rec
2 lo_check
3 end_read
3 end_op
"""

RGP_TRACE_REPAIRED = RGP_TRACE.format(middle="2 lo_check")
RGP_TRACE_BROKEN = RGP_TRACE.format(middle="2 reclaim_bookmark")

# Thread 1 enters its write phase having reserved only `a`, then touches `b`
# after thread 2 unlinked, retired and reclaimed it.
UNRESERVED_WRITE_TRACE = """\
set smr nbr
set threshold 64
1 new a
1 new b
1 begin_op
1 begin_read
1 read a
1 read b
1 end_read {reserved}
2 begin_op
2 begin_read
2 end_read
2 unlink b
2 retire b
2 event
2 end_op
1 deref b
1 end_op
"""

UNRESERVED_WRITE_BROKEN = UNRESERVED_WRITE_TRACE.format(reserved="a")
UNRESERVED_WRITE_REPAIRED = UNRESERVED_WRITE_TRACE.format(reserved="a b")

CANNED = {
    "rgp-repaired": RGP_TRACE_REPAIRED,
    "rgp-broken": RGP_TRACE_BROKEN,
    "unreserved-broken": UNRESERVED_WRITE_BROKEN,
    "unreserved-repaired": UNRESERVED_WRITE_REPAIRED,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nbrsmr-interleave",
        description="Run a deterministic interleaving script and print its verdict.")
    parser.add_argument("script", help=f"script file, '-' for stdin, or one of {sorted(CANNED)}")
    parser.add_argument("--json", action="store_true", help="print the verdict as JSON")
    args = parser.parse_args(argv)
    if args.script in CANNED:
        text = CANNED[args.script]
    elif args.script == "-":
        text = sys.stdin.read()
    else:
        with open(args.script, encoding="utf-8") as fh:
            text = fh.read()
    try:
        verdict = run_interleaving(text)
    except ScriptError as exc:
        print(f"script error: {exc}", file=sys.stderr)
        return 2
    if args.json:
        print(json.dumps(verdict.to_json(), indent=2))
    else:
        for line in verdict.log:
            print(line)
        for line in verdict.poison:
            print("poison:", line)
        for line in verdict.violations:
            print("violation:", line)
        print("PASS" if verdict.passed else "FAIL")
    return 0 if verdict.passed else 1


if __name__ == "__main__":
    sys.exit(main())
