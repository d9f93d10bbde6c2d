import random

import pytest

from slrobust.heaps import (NIL, PointsTo, PredCall, Sid, SymbolicHeap, canonical,
                            mk_heap, mk_sid, pure_atom)
from slrobust.parser import parse


SLL_TEXT = """
sll(x1, x2) <= emp : {x1 = x2}
             | ex z1 . x1 -> (z1) * sll(z1, x2) : {x1 != x2} ;
"""

DLL_TEXT = """
dll(x1, x2, x3, x4) <= emp : {x1 = x3, x2 = x4}
                     | ex u . x1 -> (u, x2) * dll(u, x1, x3, x4) ;
"""

TLL_TEXT = """
tll(x1, x2, x3) <= x1 -> (nil, nil, x3) : {x1 = x2}
                 | ex l r z . x1 -> (l, r, nil) * tll(l, x2, z) * tll(r, z, x3) ;
"""

LS_OF_LS_TEXT = """
P(x) <= emp : {x = nil}
      | Q(x, x) : {x != nil} ;
Q(x, y) <= ex c d . x -> (d, c) * P(d) : {y = nil, x != nil}
         | ex c d . x -> (d, c) : {y != nil} ;
"""


@pytest.fixture(scope="session")
def sll():
    return parse(SLL_TEXT).sid


@pytest.fixture(scope="session")
def dll():
    return parse(DLL_TEXT).sid


@pytest.fixture(scope="session")
def tll():
    return parse(TLL_TEXT).sid


@pytest.fixture(scope="session")
def ls_of_ls():
    return parse(LS_OF_LS_TEXT).sid


# ---------------------------------------------------------------------------
# Random generators (seeded; property tests iterate over fixed sample sets)


def random_reduced_heap(rng: random.Random, max_free=3, max_bound=2, max_cells=3,
                        max_targets=2, max_pure=3) -> SymbolicHeap:
    free = rng.randint(0, max_free)
    bound = rng.randint(0, max_bound)
    vars_ = [NIL, *range(1, free + 1), *(-k for k in range(1, bound + 1))]
    n_cells = rng.randint(0, max_cells)
    spatial = []
    for _ in range(n_cells):
        src = rng.choice(vars_[1:]) if len(vars_) > 1 else NIL
        if src == NIL:
            continue
        targets = tuple(rng.choice(vars_) for _ in range(rng.randint(1, max_targets)))
        spatial.append(PointsTo(src, targets))
    pure = set()
    for _ in range(rng.randint(0, max_pure)):
        a, b = rng.choice(vars_), rng.choice(vars_)
        pure.add(pure_atom(a, rng.random() < 0.5, b))
    return canonical(mk_heap(free, bound, tuple(spatial), (), pure))


def random_rule_body(rng: random.Random, arity: int, pred_arities: dict[str, int],
                     max_calls=2, max_cells=2) -> SymbolicHeap:
    bound = rng.randint(0, 2)
    vars_ = [NIL, *range(1, arity + 1), *(-k for k in range(1, bound + 1))]
    spatial = []
    for _ in range(rng.randint(0, max_cells)):
        candidates = [v for v in vars_ if v != NIL]
        if not candidates:
            break
        src = rng.choice(candidates)
        targets = tuple(rng.choice(vars_) for _ in range(rng.randint(1, 2)))
        spatial.append(PointsTo(src, targets))
    calls = []
    names = sorted(pred_arities)
    for _ in range(rng.randint(0, max_calls)):
        name = rng.choice(names)
        args = tuple(rng.choice(vars_) for _ in range(pred_arities[name]))
        calls.append(PredCall(name, args))
    pure = set()
    for _ in range(rng.randint(0, 2)):
        a, b = rng.choice(vars_), rng.choice(vars_)
        pure.add(pure_atom(a, rng.random() < 0.6, b))
    return mk_heap(arity, bound, tuple(spatial), tuple(calls), pure)


def random_sid(rng: random.Random, max_preds=3, max_arity=3, max_rules=3,
               max_calls=2, max_cells=2) -> Sid:
    n = rng.randint(1, max_preds)
    arities = {f"P{i}": rng.randint(1, max_arity) for i in range(1, n + 1)}
    preds = []
    for name, arity in arities.items():
        rules = tuple(random_rule_body(rng, arity, arities, max_calls, max_cells)
                      for _ in range(rng.randint(1, max_rules)))
        preds.append((name, arity, rules))
    return mk_sid(*preds)
