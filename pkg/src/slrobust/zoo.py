"""Property automata for robustness analysis of symbolic heaps.

All of them share one mechanism: a predicate call with an abstract input
state is replaced by a small *kernel* heap that reproduces exactly the
definite relations the state records (allocation and pure relations; for
reachability states also the reachability relation, realized by one
points-to per allocated class with a fresh existential filling the
non-reachable target positions).  The resulting reduced heap -- the shrunk
body -- is then completed, and the output state read off its definite
relations projected to the body's free variables.

Inconsistent states are the saturated full sets, so every CHECK predicate
is vacuously true there and unsatisfiable heaps count as established,
garbage-free and weakly acyclic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

from .automata import (AlphaMismatchError, HeapAutomaton, WithFinals,
                       all_accepted, exists_accepted)
from .definite import DefiniteInfo, complete
from .heaps import (NIL, PointsTo, PredCall, PureAtom, Sid, SymbolicHeap, Var,
                    mk_heap, pure_atom, var_key)


@dataclass(frozen=True)
class TrackingState:
    """Definite allocation and pure relations between the parameters
    (positions 1..arity; position 0 is nil) of one predicate call."""

    arity: int
    alloc: frozenset[int]
    pure: frozenset[PureAtom]

    @property
    def inconsistent(self) -> bool:
        return any(a.lhs == a.rhs and not a.eq for a in self.pure)

    def eq(self, i: int, j: int) -> bool:
        return i == j or pure_atom(i, True, j) in self.pure

    def __str__(self):
        al = "{" + ",".join(f"x{i}" for i in sorted(self.alloc)) + "}"
        pure = "{" + ", ".join(str(a) for a in sorted(self.pure, key=PureAtom.key)) + "}"
        return f"({al}, {pure})"


@dataclass(frozen=True)
class ReachState:
    track: TrackingState
    reach: frozenset[tuple[int, int]]

    @property
    def inconsistent(self) -> bool:
        return self.track.inconsistent

    def __str__(self):
        r = "{" + ", ".join(f"(x{a},x{b})" for a, b in sorted(self.reach)) + "}"
        return f"({self.track}, {r})"


def saturated_tracking(arity: int) -> TrackingState:
    positions = range(0, arity + 1)
    pure = frozenset(pure_atom(a, e, b)
                     for a in positions for b in positions if a <= b
                     for e in (True, False))
    return TrackingState(arity, frozenset(range(1, arity + 1)), pure)


def tracking_of(info: DefiniteInfo, arity: int) -> TrackingState:
    """Project a completion to the free variables {nil, x1..x_arity}."""
    cache = info.__dict__.setdefault("_track_cache", {})
    if arity in cache:
        return cache[arity]
    if info.inconsistent:
        state = saturated_tracking(arity)
    else:
        positions = list(range(0, arity + 1))
        atoms = set()
        for i, a in enumerate(positions):
            for b in positions[i + 1:]:
                if info.eq(a, b):
                    atoms.add(pure_atom(a, True, b))
                elif info.neq(a, b):
                    atoms.add(pure_atom(a, False, b))
        alloc = frozenset(i for i in range(1, arity + 1) if info.allocated(i))
        state = TrackingState(arity, alloc, frozenset(atoms))
    cache[arity] = state
    return state


def reach_of(info: DefiniteInfo, arity: int) -> ReachState:
    cache = info.__dict__.setdefault("_reach_cache", {})
    if arity in cache:
        return cache[arity]
    track = tracking_of(info, arity)
    if info.inconsistent:
        pairs = frozenset((i, j) for i in range(0, arity + 1)
                          for j in range(0, arity + 1))
        state = ReachState(track, pairs)
    else:
        r = info.reach()
        pairs = frozenset((i, j) for i in range(0, arity + 1)
                          for j in range(0, arity + 1) if (i, j) in r)
        state = ReachState(track, pairs)
    cache[arity] = state
    return state


# ---------------------------------------------------------------------------
# Kernels and shrinking


def _min_allocated(state: TrackingState) -> list[int]:
    """Minimal (by position) allocated representative per equality class."""
    mins = []
    for i in sorted(state.alloc):
        if not any(j in state.alloc and state.eq(i, j) for j in mins):
            mins.append(i)
    return mins


def kernel_atoms(call: PredCall, state: TrackingState | ReachState,
                 fresh_bound: int):
    """Spatial and pure atoms encoding ``state`` over the call's arguments.

    Returns (cells, pure_atoms, used_fresh).  ``fresh_bound`` is the bound
    variable used by the reachability variant to fill target positions that
    must not introduce reachability.
    """
    track = state.track if isinstance(state, ReachState) else state
    k = len(call.args)
    if track.arity != k:
        raise AlphaMismatchError(
            f"state of arity {track.arity} fed to call {call} of arity {k}")

    def var_at(pos: int) -> Var:
        return NIL if pos == 0 else call.args[pos - 1]

    pure = [pure_atom(var_at(a.lhs), a.eq, var_at(a.rhs)) for a in track.pure]
    cells = []
    used_fresh = False
    if isinstance(state, ReachState):
        for i in _min_allocated(track):
            targets = []
            for j in range(0, k + 1):
                if (i, j) in state.reach:
                    targets.append(var_at(j))
                else:
                    targets.append(fresh_bound)
                    used_fresh = True
            cells.append(PointsTo(var_at(i), tuple(targets)))
        if not cells:
            used_fresh = False
    else:
        cells = [PointsTo(var_at(i), (NIL,)) for i in _min_allocated(track)]
    return cells, pure, used_fresh


def kernel_heap(call: PredCall, state: TrackingState | ReachState,
                free_count: Optional[int] = None) -> SymbolicHeap:
    """The kernel as a standalone reduced heap over the call's arguments."""
    n = free_count if free_count is not None else max([0, *call.args])
    cells, pure, used = kernel_atoms(call, state, -1)
    return mk_heap(n, 1 if used else 0, cells, (), pure)


def shrink(body: SymbolicHeap, inputs: Sequence[TrackingState | ReachState]
           ) -> SymbolicHeap:
    """Replace every call by its input state's kernel; shrink(tau, ()) = tau."""
    if len(inputs) != len(body.calls):
        raise ValueError(f"{len(body.calls)} calls but {len(inputs)} input states")
    if not body.calls:
        return body
    spatial = list(body.spatial)
    pure = set(body.pure)
    bound = body.bound_count
    for call, state in zip(body.calls, inputs):
        cells, atoms, used = kernel_atoms(call, state, -(bound + 1))
        if used:
            bound += 1
        spatial.extend(cells)
        pure.update(atoms)
    return SymbolicHeap(body.free_count, bound, tuple(spatial), (), frozenset(pure))


# ---------------------------------------------------------------------------
# The relation-tracking automata


class _RelationAutomaton(HeapAutomaton):
    """Shared machinery of the tracking and reachability automata."""

    deterministic = True
    with_reach = False

    def __init__(self, alpha: int):
        if alpha < 0:
            raise ValueError("alpha must be non-negative")
        self.alpha = alpha

    def _validate(self, body: SymbolicHeap, inputs):
        if body.free_count > self.alpha:
            raise AlphaMismatchError(
                f"heap with {body.free_count} free variables exceeds alpha {self.alpha}")
        for call in body.calls:
            if len(call.args) > self.alpha:
                raise AlphaMismatchError(
                    f"call {call} exceeds alpha {self.alpha}")
        if len(inputs) != len(body.calls):
            raise ValueError("one input state per predicate call required")

    def shrunk_info(self, body, inputs) -> DefiniteInfo:
        self._validate(body, inputs)
        return complete(shrink(body, inputs))

    def state_of(self, info: DefiniteInfo, arity: int):
        return reach_of(info, arity) if self.with_reach else tracking_of(info, arity)

    def targets(self, body, inputs):
        return [self.state_of(self.shrunk_info(body, inputs), body.free_count)]

    def is_final(self, state):
        raise NotImplementedError("attach finals via a property specification")


class TrackingAutomaton(_RelationAutomaton):
    with_reach = False


class ReachabilityAutomaton(_RelationAutomaton):
    with_reach = True


class FlaggedAutomaton(HeapAutomaton):
    """A relation automaton run in parallel with a CHECK predicate; the flag
    is the minimum of the input flags and CHECK on the current body."""

    deterministic = True

    def __init__(self, base: _RelationAutomaton, check):
        self.base = base
        self.check = check
        self.alpha = base.alpha

    def targets(self, body, inputs):
        base_inputs = [q[0] for q in inputs]
        info = self.base.shrunk_info(body, base_inputs)
        base_state = self.base.state_of(info, body.free_count)
        if info.inconsistent:
            # vacuous truth: unsatisfiable heaps have every CHECK property,
            # regardless of flags collected in (now irrelevant) subtrees
            return [(base_state, 1)]
        flags = [q[1] for q in inputs]
        flags.append(self.check(body, info))
        return [(base_state, min(flags))]

    def is_final(self, state):
        raise NotImplementedError("attach finals via a property specification")


def _body_vars(body: SymbolicHeap) -> list[Var]:
    return [*range(1, body.free_count + 1),
            *(-k for k in range(1, body.bound_count + 1))]


def check_established(body: SymbolicHeap, info: DefiniteInfo) -> int:
    free = [NIL, *range(1, body.free_count + 1)]
    for y in _body_vars(body):
        if not (info.allocated(y) or any(info.eq(x, y) for x in free)):
            return 0
    return 1


def check_garbage_free(body: SymbolicHeap, info: DefiniteInfo) -> int:
    free = [NIL, *range(1, body.free_count + 1)]
    reach = info.reach()
    for y in _body_vars(body):
        if not any(info.eq(x, y) or (x, y) in reach for x in free):
            return 0
    return 1


def check_weakly_acyclic(body: SymbolicHeap, info: DefiniteInfo) -> int:
    reach = info.reach()
    for y in _body_vars(body):
        if (y, y) in reach:
            return 0
    return 1


class HasPointsToAutomaton(HeapAutomaton):
    """Accepts reduced heaps containing at least one points-to assertion."""

    deterministic = True

    def __init__(self, alpha: int):
        self.alpha = alpha

    def targets(self, body, inputs):
        if len(inputs) != len(body.calls):
            raise ValueError("one input state per predicate call required")
        return [1 if (body.spatial or any(inputs)) else 0]

    def is_final(self, state):
        return state == 1


# ---------------------------------------------------------------------------
# Property specifications


@dataclass(frozen=True)
class PropertySpec:
    kind: str
    alloc: Optional[frozenset[int]] = None
    pure: Optional[frozenset[PureAtom]] = None
    reach_rel: Optional[frozenset[tuple[int, int]]] = None

    def __str__(self):
        return self.kind


HAS_POINTS_TO = PropertySpec("has-pts")
SAT = PropertySpec("sat")
UNSAT = PropertySpec("unsat")
ESTABLISHED = PropertySpec("est")
NOT_ESTABLISHED = PropertySpec("non-est")
GARBAGE_FREE = PropertySpec("gf")
WEAKLY_ACYCLIC = PropertySpec("acyc")


def track_spec(alloc, pure) -> PropertySpec:
    return PropertySpec("track", alloc=frozenset(alloc), pure=frozenset(pure))


def reach_spec(rel) -> PropertySpec:
    return PropertySpec("reach", reach_rel=frozenset(rel))


def _transitive_closure(rel: frozenset[tuple[int, int]]) -> frozenset[tuple[int, int]]:
    pairs = set(rel)
    changed = True
    while changed:
        changed = False
        for (a, b), (c, d) in itertools.product(list(pairs), list(pairs)):
            if b == c and (a, d) not in pairs:
                pairs.add((a, d))
                changed = True
    return frozenset(pairs)


def build_property_automaton(spec: PropertySpec, alpha: int) -> HeapAutomaton:
    """The deterministic heap automaton deciding ``spec`` at width ``alpha``."""
    if spec.kind == "has-pts":
        return HasPointsToAutomaton(alpha)
    if spec.kind in ("sat", "unsat", "track"):
        base = TrackingAutomaton(alpha)
        if spec.kind == "sat":
            return WithFinals(base, lambda q: not q.inconsistent)
        if spec.kind == "unsat":
            return WithFinals(base, lambda q: q.inconsistent)
        goal = _normalize_track_goal(spec, alpha)
        return WithFinals(base, lambda q: q == goal)
    if spec.kind == "reach":
        base = ReachabilityAutomaton(alpha)
        goal = _transitive_closure(spec.reach_rel)
        for i, j in goal:
            if not 0 <= i <= alpha or not 0 <= j <= alpha:
                raise AlphaMismatchError("reach relation mentions positions beyond alpha")
        return WithFinals(base, lambda q: q.reach == goal)
    if spec.kind in ("est", "non-est"):
        flagged = FlaggedAutomaton(TrackingAutomaton(alpha), check_established)
        want = 1 if spec.kind == "est" else 0
        return WithFinals(flagged, lambda q: q[1] == want)
    if spec.kind == "gf":
        flagged = FlaggedAutomaton(ReachabilityAutomaton(alpha), check_garbage_free)
        return WithFinals(flagged, lambda q: q[1] == 1)
    if spec.kind == "acyc":
        flagged = FlaggedAutomaton(ReachabilityAutomaton(alpha), check_weakly_acyclic)
        return WithFinals(flagged, lambda q: q[1] == 1 or q[0].inconsistent)
    raise ValueError(f"unsupported property {spec.kind!r}")


def _normalize_track_goal(spec: PropertySpec, alpha: int) -> TrackingState:
    """Close the user-supplied (alloc, pure) pair the way reachable states
    are closed: build its kernel heap and read the completion back."""
    for i in spec.alloc:
        if not 1 <= i <= alpha:
            raise AlphaMismatchError("alloc set mentions positions beyond alpha")
    for a in spec.pure:
        if not 0 <= a.lhs <= alpha or not 0 <= a.rhs <= alpha:
            raise AlphaMismatchError("pure set mentions positions beyond alpha")
    raw = TrackingState(alpha, frozenset(spec.alloc), frozenset(spec.pure))
    call = PredCall("_goal", tuple(range(1, alpha + 1)))
    return tracking_of(complete(kernel_heap(call, raw, alpha)), alpha)


# ---------------------------------------------------------------------------
# Top-level property checks


def query_alpha(sid: Sid, phi: SymbolicHeap) -> int:
    return max(sid.max_arity(), phi.free_count)


def check_property(sid: Sid, phi: SymbolicHeap, spec: PropertySpec,
                   mode: str = "forall") -> bool:
    """Decide whether all (or some) unfoldings of ``phi`` have the property."""
    if mode not in ("forall", "exists"):
        raise ValueError("mode must be 'forall' or 'exists'")
    automaton = build_property_automaton(spec, query_alpha(sid, phi))
    if mode == "exists":
        return exists_accepted(sid, phi, automaton)
    return all_accepted(sid, phi, automaton)


def oracle_check_property(sid: Sid, phi: SymbolicHeap, spec: PropertySpec,
                          mode: str, max_height: int, cap: int = 100_000) -> bool:
    """Brute-force route: evaluate the property on every enumerated unfolding
    up to ``max_height``.  Sound for exists-queries (and dually for forall)
    whenever ``max_height`` is at least the pumping height of the automaton
    run; used to cross-check the fixpoint engine."""
    from .heaps import enumerate_unfoldings
    automaton = build_property_automaton(spec, query_alpha(sid, phi))
    unfoldings = enumerate_unfoldings(sid, phi, max_height, cap)
    if mode == "exists":
        return any(automaton.accepts(u) for u in unfoldings)
    if mode == "forall":
        return all(automaton.accepts(u) for u in unfoldings)
    raise ValueError("mode must be 'forall' or 'exists'")


def pumping_height(sid: Sid, phi: SymbolicHeap, spec: PropertySpec,
                   mode: str = "forall") -> int:
    """Unfolding-tree height sufficient for the bounded oracle to agree with
    the fixpoint verdict: one past the number of discovered pairs."""
    from .automata import _explore, _fresh_name
    automaton = build_property_automaton(spec, query_alpha(sid, phi))
    if mode == "forall":
        from .automata import complement as _complement
        automaton = _complement(automaton)
    name = _fresh_name(sid)
    _, table = _explore(sid.extended(name, phi.free_count, [phi]), automaton,
                        stop_pred=None)
    return table.states_discovered() + 1


def check_reach_pair(sid: Sid, phi: SymbolicHeap, x: int, y: int,
                     mode: str = "forall") -> bool:
    """Decide whether y is definitely reachable from x in all/some unfoldings
    (the pairwise reachability question, distinct from the exact-relation
    property)."""
    alpha = query_alpha(sid, phi)
    base = ReachabilityAutomaton(alpha)
    automaton = WithFinals(base, lambda q: (x, y) in q.reach)
    if mode == "exists":
        return exists_accepted(sid, phi, automaton)
    return all_accepted(sid, phi, automaton)
