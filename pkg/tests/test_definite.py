import itertools
import random

import pytest

from slrobust.definite import NotReducedError, UnknownVariableError, complete, definitely_reaches
from slrobust.heaps import NIL, mk_heap, PredCall, pure_atom
from slrobust.models import enumerate_tight_models
from slrobust.parser import parse_body

from conftest import random_reduced_heap


def test_tll_base_rule_relations(tll):
    body = tll.rules("tll")[0]  # x1 -> (nil, nil, x3) : {x1 = x2}
    info = complete(body)
    assert not info.inconsistent
    assert info.alloc == {1, 2}
    assert info.eq(1, 2)
    assert info.neq(1, NIL)
    assert (1, 3) in info.points and (2, 3) in info.points
    assert not info.eq(1, 3) and not info.neq(1, 3)


def test_emp_completion():
    info = complete(mk_heap(2))
    assert not info.inconsistent
    assert info.alloc == frozenset()
    assert all(a.eq and a.lhs == a.rhs for a in info.closure)


def test_forced_alias_of_distinct_sources_is_inconsistent():
    tau = parse_body("x1 -> (x2) * x3 -> (x4) : {x1 = x3}", 4)
    info = complete(tau)
    assert info.inconsistent
    # saturation: every definite relation holds vacuously
    assert info.alloc == frozenset(info.variables)
    assert info.eq(2, 4) and info.neq(2, 4)
    assert (4, 2) in info.reach()


def test_not_reduced_rejected():
    tau = mk_heap(1, calls=[PredCall("P", (1,))])
    with pytest.raises(NotReducedError):
        complete(tau)


def test_reaches_simple_edge():
    tau = parse_body("x1 -> (x2)", 2)
    assert definitely_reaches(tau, 1, 2)
    assert not definitely_reaches(tau, 2, 1)


def test_reaches_through_existential():
    tau = parse_body("ex y . x1 -> (y) * y -> (x2)", 2)
    assert definitely_reaches(tau, 1, 2)


def test_reach_not_propagated_through_unallocated():
    tau = parse_body("ex z . x1 -> (z)", 3)
    assert not definitely_reaches(tau, 1, 3)


def test_reaches_unknown_variable():
    tau = parse_body("x1 -> (x2)", 2)
    with pytest.raises(UnknownVariableError):
        definitely_reaches(tau, 1, 9)


def test_complete_idempotent():
    rng = random.Random(5)
    for _ in range(60):
        tau = random_reduced_heap(rng)
        info = complete(tau)
        again = complete(tau.with_extra_pure(
            a for a in info.closure if a.lhs != a.rhs or not a.eq))
        assert again.closure == info.closure
        assert again.alloc == info.alloc
        assert again.points == info.points
        assert again.inconsistent == info.inconsistent


def test_closure_contains_pure_and_eq_is_equivalence():
    rng = random.Random(6)
    for _ in range(60):
        tau = random_reduced_heap(rng)
        info = complete(tau)
        assert tau.pure <= info.closure
        vs = info.variables
        for x in vs:
            assert info.eq(x, x)
            for y in vs:
                assert info.eq(x, y) == info.eq(y, x)
                for z in vs:
                    if info.eq(x, y) and info.eq(y, z):
                        assert info.eq(x, z)


def _strip(tau):
    """Make every bound variable free (definite relations quantify the strip)."""
    n = tau.free_count

    def remap(v):
        return n - v if v < 0 else v

    return tau.map_vars(remap, n + tau.bound_count, 0)


def _model_relations(tau):
    """Semantic oracle: relations that hold in every bounded-domain model of
    the stripped heap (raw models, since relations against nil are not stable
    under value renaming).  Returns None for unsatisfiable heaps."""
    strip = _strip(tau)
    models = list(enumerate_tight_models(strip))
    if not models:
        return None
    n = strip.free_count
    eq, neq, alloc, points, reach = None, None, None, None, None
    for m in models:
        s = dict(m.stack)
        s[NIL] = 0
        h = m.heap_map()
        vals = {v: s[v] for v in range(0, n + 1)}
        m_eq = {(a, b) for a in vals for b in vals if vals[a] == vals[b]}
        m_neq = {(a, b) for a in vals for b in vals if vals[a] != vals[b]}
        m_alloc = {a for a in vals if vals[a] in h}
        m_points = {(a, b) for a in vals for b in vals
                    if vals[a] in h and vals[b] in h[vals[a]]}
        succ = {}
        for loc, tup in h.items():
            succ.setdefault(loc, set()).update(tup)
        m_reach = set()
        for a in vals:
            frontier, seen = [vals[a]], set()
            while frontier:
                v = frontier.pop()
                for w in succ.get(v, ()):
                    if w not in seen:
                        seen.add(w)
                        frontier.append(w)
            m_reach.update((a, b) for b in vals if vals[b] in seen)
        eq = m_eq if eq is None else eq & m_eq
        neq = m_neq if neq is None else neq & m_neq
        alloc = m_alloc if alloc is None else alloc & m_alloc
        points = m_points if points is None else points & m_points
        reach = m_reach if reach is None else reach & m_reach
    return eq, neq, alloc, points, reach


def test_definite_relations_match_model_oracle():
    rng = random.Random(99)
    done = 0
    while done < 200:
        tau = random_reduced_heap(rng, max_free=2, max_bound=2, max_cells=2)
        if tau.free_count + tau.bound_count > 4 or len(tau.spatial) > 2:
            continue
        info = complete(tau)
        sem = _model_relations(tau)
        if sem is None:
            assert info.inconsistent
            done += 1
            continue
        assert not info.inconsistent
        eq, neq, alloc, points, reach = sem
        n = tau.free_count
        strip_idx = lambda v: n - v if v < 0 else v
        vs = info.variables
        for x in vs:
            sx = strip_idx(x)
            assert info.allocated(x) == (sx in alloc)
            for y in vs:
                sy = strip_idx(y)
                assert info.eq(x, y) == ((sx, sy) in eq)
                assert info.neq(x, y) == ((sx, sy) in neq)
                assert ((x, y) in info.points) == ((sx, sy) in points)
                assert ((x, y) in info.reach()) == ((sx, sy) in reach)
        done += 1


def test_reach_transitive():
    rng = random.Random(17)
    for _ in range(80):
        tau = random_reduced_heap(rng)
        r = complete(tau).reach()
        for (a, b), (c, d) in itertools.product(r, r):
            if b == c:
                assert (a, d) in r
