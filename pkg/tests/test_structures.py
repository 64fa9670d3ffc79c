import random
import threading

import pytest
from hypothesis import given, settings, strategies as st

from nbrsmr import (
    Lifecycle,
    OpKind,
    Phase,
    UnsupportedCombination,
    make_reclaimer,
    make_set,
)
from nbrsmr.structures.base import MAX_KEY, result
from nbrsmr.structures.harrislist import HarrisNode
from nbrsmr.validation.faults import FaultInjector

COMBOS = [("lazylist", s) for s in ("nbr", "nbrplus", "ebr", "hp", "leaky")] + \
         [("harrislist", s) for s in ("nbr", "nbrplus", "ebr", "leaky")]


def build(ds, smr, **cfg):
    rec = make_reclaimer(smr, **cfg)
    return rec, make_set(ds, rec), rec.register_thread()


def oracle_apply(model, op, key):
    if op == "insert":
        if key in model:
            return OpKind.DUPLICATE
        model.add(key)
        return OpKind.INSERTED
    if op == "delete":
        if key in model:
            model.remove(key)
            return OpKind.REMOVED
        return OpKind.ABSENT
    return OpKind.FOUND if key in model else OpKind.NOT_FOUND


@pytest.mark.parametrize("debug", [False, True])
@pytest.mark.parametrize("ds,smr", COMBOS)
def test_sequential_oracle(ds, smr, debug):
    rng = random.Random(f"{ds}-{smr}-{debug}")
    reclaimer, s, ctx = build(ds, smr, debug=debug, threshold=16)
    model = set()
    for _ in range(3000):
        op = rng.choice(("insert", "delete", "contains"))
        key = rng.randrange(64)
        got = getattr(s, op)(ctx, key)
        assert got.kind is oracle_apply(model, op, key), (op, key)
        assert got.restarts == 0
    assert s.keys() == sorted(model)
    s.check_invariants()
    if smr != "leaky":
        assert ctx.freed > 0
    assert ctx.phase is Phase.QUIESCENT


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(COMBOS),
       st.lists(st.tuples(st.sampled_from(["insert", "delete", "contains"]),
                          st.integers(-5, 20)), max_size=80))
def test_sequential_oracle_property(combo, ops):
    ds, smr = combo
    _, s, ctx = build(ds, smr, debug=True, threshold=4)
    model = set()
    for op, key in ops:
        assert getattr(s, op)(ctx, key).kind is oracle_apply(model, op, key)
    assert s.keys() == sorted(model)


def test_lazylist_small_examples():
    _, s, ctx = build("lazylist", "nbr")
    s.insert(ctx, 3)
    s.insert(ctx, 7)
    assert s.insert(ctx, 5).kind is OpKind.INSERTED
    assert s.keys() == [3, 5, 7]
    assert s.delete(ctx, 4).kind is OpKind.ABSENT
    assert s.insert(ctx, 5).kind is OpKind.DUPLICATE
    assert len(s) == 3


def test_debug_rejects_sentinel_keys():
    _, s, ctx = build("lazylist", "nbr", debug=True)
    with pytest.raises(ValueError):
        s.insert(ctx, MAX_KEY)


def test_harris_with_hazard_pointers_rejected():
    with pytest.raises(UnsupportedCombination):
        make_set("harrislist", make_reclaimer("hp"))


def test_unknown_structure_rejected():
    with pytest.raises(ValueError):
        make_set("skiplist", make_reclaimer("nbr"))


def test_zero_restart_results_are_shared():
    assert result(OpKind.FOUND, 0) is result(OpKind.FOUND, 0)
    assert result(OpKind.FOUND, 2).restarts == 2


@pytest.mark.parametrize("smr", ["nbr", "nbrplus"])
def test_lazylist_insert_with_injected_neutralization(smr):
    _, plain, pctx = build("lazylist", smr, debug=True)
    _, s, ctx = build("lazylist", smr, debug=True)
    for key in range(0, 40, 2):
        plain.insert(pctx, key)
        s.insert(ctx, key)
    inj = FaultInjector(at_deref=5).attach(ctx)
    got = s.insert(ctx, 21)
    inj.detach(ctx)
    assert got.kind is OpKind.INSERTED
    assert got.restarts >= 1 and inj.injections == 1
    assert plain.insert(pctx, 21).kind is OpKind.INSERTED
    assert s.keys() == plain.keys()


def harris_with(keys, marked=(), smr="nbr"):
    reclaimer, s, ctx = build("harrislist", smr, debug=True, threshold=64)
    for k in sorted(keys, reverse=True):
        s.insert(ctx, k)
    node, _ = s.head.next
    nodes = {}
    while node is not s.tail:
        nodes[node.key] = node
        node = node.next[0]
    for k in marked:
        nxt, _ = nodes[k].next
        nodes[k].next = (nxt, True)
    return reclaimer, s, ctx, nodes


def test_harris_worked_trace_final_state():
    _, s, ctx, nodes = harris_with([1, 2, 3, 4, 6, 10], marked=[3])
    assert s.keys() == [1, 2, 4, 6, 10]
    assert s.insert(ctx, 9).kind is OpKind.INSERTED
    assert s.keys() == [1, 2, 4, 6, 9, 10]
    assert s.root_violations == 0


def test_harris_search_spanning_marked_node_unlinks_and_retires_it():
    reclaimer, s, ctx, nodes = harris_with([1, 2, 3, 4, 6, 10], marked=[3])
    before = ctx.retired
    assert s.insert(ctx, 4).kind is OpKind.DUPLICATE
    assert nodes[3].state is Lifecycle.UNLINKED
    assert ctx.retired == before + 1
    assert nodes[2].next == (nodes[4], False)


def test_harris_duplicate_insert_changes_nothing():
    _, s, ctx, nodes = harris_with([1, 5, 9])
    snapshot = [n.next for n in nodes.values()]
    assert s.insert(ctx, 5).kind is OpKind.DUPLICATE
    assert [n.next for n in nodes.values()] == snapshot


class Perturber:
    """Fault hook: injects in read phases and, in write phases, lets another
    thread context slip in an insert that invalidates the pending CAS."""

    def __init__(self, s, other, keys, injector):
        self.s = s
        self.other = other
        self.keys = list(keys)
        self.injector = injector

    def __call__(self, ctx, rec):
        if ctx.phase is Phase.WRITE and self.keys:
            saved = ctx.fault
            ctx.fault = None
            try:
                self.s.insert(self.other, self.keys.pop(0))
            finally:
                ctx.fault = saved
            return
        self.injector(ctx, rec)


@pytest.mark.parametrize("smr", ["nbr", "nbrplus"])
def test_harris_insert_neutralized_in_every_read_phase(smr):
    reclaimer, s, ctx, nodes = harris_with([10, 20, 30, 40], marked=[20], smr=smr)
    other = reclaimer.register_thread()
    inj = FaultInjector(at_deref=2)
    inj.attach(ctx)
    ctx.fault = Perturber(s, other, [24, 23, 26], inj)
    got = s.insert(ctx, 25)
    ctx.fault = None
    assert got.kind is OpKind.INSERTED
    # One read phase per search attempt: the first, then one per lost CAS.
    assert inj.injected == [1, 2, 3]
    assert got.restarts >= inj.injections
    assert s.keys() == [10, 23, 24, 25, 26, 30, 40]
    assert nodes[20].state is Lifecycle.UNLINKED
    assert s.root_violations == 0
    s.check_invariants()


def test_concurrent_harris_with_injectors():
    reclaimer = make_reclaimer("nbr", debug=True, threshold=32)
    s = make_set("harrislist", reclaimer)
    counts = []
    lock = threading.Lock()
    errors = []

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
                counts.append((ins, rem, inj.injections, ctx.restarts))
            inj.detach(ctx)
        except BaseException as exc:  # noqa: BLE001
            errors.append(exc)

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    assert reclaimer.allocator.poison_count == 0
    assert s.root_violations == 0
    for _, _, injections, restarts in counts:
        assert injections > 0 and restarts >= injections
    s.check_invariants()
    assert len(s) == sum(i for i, *_ in counts) - sum(r for _, r, *_ in counts)


def test_harris_insert_racing_delete_keeps_unlinked_state(monkeypatch):
    from nbrsmr.structures import harrislist

    reclaimer, s, ctx = build("harrislist", "nbr", debug=True, threshold=64)
    other = reclaimer.register_thread()
    s.insert(ctx, 10)
    real_cas = harrislist.cas_next
    raced = []

    def cas_then_delete(node, expected, new):
        ok = real_cas(node, expected, new)
        target = new[0]
        if ok and not raced and not new[1] and target is not None and target.key == 5:
            # The new node is linked; a concurrent delete removes it at once.
            raced.append(target)
            assert s.delete(other, 5).kind is OpKind.REMOVED
        return ok

    monkeypatch.setattr(harrislist, "cas_next", cas_then_delete)
    assert s.insert(ctx, 5).kind is OpKind.INSERTED
    assert raced and raced[0].state is Lifecycle.UNLINKED
    monkeypatch.undo()
    reclaimer.drain(other)
    assert raced[0].state is Lifecycle.RECLAIMED
    assert s.keys() == [10]
