import random

import pytest

from slrobust.heaps import (ArityError, OracleCapExceeded, PredCall, UnfoldingTree,
                            canonical, enumerate_unfoldings, leaf, mk_heap, mk_sid,
                            nonempty_predicates, replace_call, unfold, validate_sid)
from slrobust.parser import parse, parse_body

from conftest import random_sid


def call_heap(sid, name):
    arity = sid.arity(name)
    return mk_heap(arity, calls=[PredCall(name, tuple(range(1, arity + 1)))])


# ---------------------------------------------------------------------------
# validate_sid


def test_validate_dll_is_clean(dll):
    assert validate_sid(dll) == []


def test_validate_arity_mismatch():
    doc = parse("sll(x, y) <= emp : {x = y} | ex z . x -> (z) * sll(z, y) ;")
    sid = doc.sid
    # build an ill-formed variant bypassing the parser's own arity check
    bad_rule = parse_body("ex z . x1 -> (z) * sll(z, x2)", 2).map_vars(
        lambda v: v, 2, 1)
    bad_rule = mk_heap(2, 1, bad_rule.spatial, [PredCall("sll", (-1,))], bad_rule.pure)
    bad = mk_sid(("sll", 2, (sid.rules("sll")[0], bad_rule)))
    kinds = [d.kind for d in validate_sid(bad)]
    assert kinds == ["ArityMismatch"]


def test_validate_unknown_predicate():
    rule = mk_heap(1, 0, (), [PredCall("Q", (1,))], ())
    bad = mk_sid(("p", 1, (rule,)))
    kinds = [d.kind for d in validate_sid(bad)]
    assert kinds == ["UnknownPredicate"]


# ---------------------------------------------------------------------------
# replace_call


def test_replace_dll_rule2_with_rule1(dll):
    host = dll.rules("dll")[1]
    body = dll.rules("dll")[0]
    result = replace_call(host, 0, body)
    expected = parse_body("ex u . x1 -> (u, x2) : {u = x3, x1 = x4}", 4)
    assert canonical(result) == canonical(expected)


def test_replace_nullary_call_with_emp_is_identity():
    host = mk_heap(1, 0, parse_body("x1 -> (nil)", 1).spatial, [PredCall("P", ())],
                   parse_body("emp : {x1 != nil}", 1).pure)
    result = replace_call(host, 0, mk_heap(0))
    assert result == mk_heap(1, 0, host.spatial, (), host.pure)


def test_replace_sll_rule2_with_itself(sll):
    host = sll.rules("sll")[1]
    result = replace_call(host, 0, host)
    assert len(result.spatial) == 2
    assert result.bound_count == 2
    assert len(result.calls) == 1
    expected_pure = parse_body("ex z u . emp : {x1 != x2, z != x2}", 2).pure
    assert result.pure == expected_pure


def test_replace_arity_mismatch(sll):
    host = sll.rules("sll")[1]
    with pytest.raises(ArityError):
        replace_call(host, 0, mk_heap(3))
    with pytest.raises(IndexError):
        replace_call(host, 5, mk_heap(2))


# ---------------------------------------------------------------------------
# unfold


def test_unfold_single_node_is_identity(sll):
    base = sll.rules("sll")[0]
    assert unfold(leaf(base, ("sll", 0))) == canonical(base)


def test_unfold_dll_two_nodes(dll):
    tree = UnfoldingTree(dll.rules("dll")[1], (leaf(dll.rules("dll")[0], ("dll", 0)),),
                         ("dll", 1))
    expected = canonical(parse_body("ex z . x1 -> (z, x2) : {z = x3, x1 = x4}", 4))
    assert unfold(tree) == expected


def test_unfold_sll_three_node_chain(sll):
    r1, r2 = sll.rules("sll")
    tree = UnfoldingTree(r2, (UnfoldingTree(r2, (leaf(r1, ("sll", 0)),), ("sll", 1)),),
                         ("sll", 1))
    expected = canonical(parse_body(
        "ex z u . x1 -> (z) * z -> (u) : {x1 != x2, z != x2, u = x2}", 2))
    assert unfold(tree) == expected


def test_unfold_against_one_shot_flattening(sll, dll, tll):
    # independent route: repeatedly substitute the leftmost call top-down
    def flatten(tree):
        heap, pending = tree.body, list(tree.children)
        while heap.calls:
            child = pending.pop(0)
            heap = replace_call(heap, 0, child.body)
            pending[0:0] = list(child.children)
        return canonical(heap)

    rng = random.Random(7)

    def random_tree(sid, pred, height):
        rules = sid.rules(pred)
        candidates = [i for i, r in enumerate(rules) if height > 1 or not r.calls]
        if not candidates:
            candidates = list(range(len(rules)))
        idx = rng.choice(candidates)
        body = rules[idx]
        children = tuple(random_tree(sid, c.predicate, height - 1) for c in body.calls)
        return UnfoldingTree(body, children, (pred, idx))

    for sid, pred in [(sll, "sll"), (dll, "dll"), (tll, "tll")]:
        for _ in range(40):
            t = random_tree(sid, pred, 3)
            assert unfold(t) == flatten(t)


# ---------------------------------------------------------------------------
# enumerate_unfoldings


def test_enumerate_sll_height1(sll):
    got = enumerate_unfoldings(sll, call_heap(sll, "sll"), 1)
    assert got == [canonical(parse_body("emp : {x1 = x2}", 2))]


def test_enumerate_sll_height2(sll):
    got = enumerate_unfoldings(sll, call_heap(sll, "sll"), 2)
    expected = sorted([
        canonical(parse_body("emp : {x1 = x2}", 2)),
        canonical(parse_body("ex z . x1 -> (z) : {z = x2, x1 != x2}", 2)),
    ], key=lambda h: h.sort_key())
    assert got == expected


def test_enumerate_dll_height0(dll):
    assert enumerate_unfoldings(dll, call_heap(dll, "dll"), 0) == []


def test_enumerate_monotone_in_height():
    rng = random.Random(11)
    checked = 0
    for _ in range(30):
        sid = random_sid(rng, max_preds=2, max_rules=2, max_calls=1)
        if validate_sid(sid):
            continue
        start = call_heap(sid, sid.names()[0])
        try:
            sets = [set(enumerate_unfoldings(sid, start, h, cap=20_000))
                    for h in range(0, 5)]
        except OracleCapExceeded:
            continue
        for small, big in zip(sets, sets[1:]):
            assert small <= big
        checked += 1
    assert checked >= 15


def test_enumerate_cap():
    sid = parse("t(x) <= x -> (nil) | ex a b . x -> (a, b) * t(a) * t(b) ;").sid
    with pytest.raises(OracleCapExceeded):
        enumerate_unfoldings(sid, call_heap(sid, "t"), 12, cap=500)


# ---------------------------------------------------------------------------
# nonempty_predicates


def test_nonempty_sll(sll):
    assert nonempty_predicates(sll) == {"sll"}


def test_nonempty_no_base_case():
    sid = parse("P(x) <= ex z . x -> (z) * P(z) ;").sid
    assert nonempty_predicates(sid) == frozenset()


def test_nonempty_two_level():
    sid = parse("""
        P(x) <= x -> (nil) | ex z . x -> (z) * P(z) ;
        Q(x) <= P(x) ;
    """).sid
    assert nonempty_predicates(sid) == {"P", "Q"}


def test_nonempty_matches_enumeration():
    rng = random.Random(23)
    checked = 0
    for _ in range(40):
        sid = random_sid(rng, max_preds=2, max_rules=2, max_calls=2, max_cells=1)
        if validate_sid(sid):
            continue
        n_rules = sum(len(rules) for _, _, rules in sid.preds)
        max_calls = max((len(b.calls) for _, _, rules in sid.preds for b in rules),
                        default=0)
        height = n_rules * max_calls + 1
        try:
            via_oracle = {name for name in sid.names()
                          if enumerate_unfoldings(sid, call_heap(sid, name), height,
                                                  cap=30_000)}
        except OracleCapExceeded:
            continue
        assert nonempty_predicates(sid) == via_oracle
        checked += 1
    assert checked >= 20
