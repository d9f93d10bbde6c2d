"""Entailment checking between determined symbolic heaps.

The decision procedure filters the left-hand side's unfoldings down to the
satisfiable ones (making the SID well-determined), builds an automaton for
the set U(rhs) of reduced heaps entailing some unfolding of the right-hand
side, and checks that no left unfolding lands in the complement.

All U-set automata here follow one architecture: a state couples a
syntactic payload (which extension class the heap belongs to) with the
tracking state of its free variables.  Transitions substitute, per call, a
small representation heap for the payload and the tracked pure relations
for the annotations, then re-classify the reduced result.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence

from .automata import (AlphaMismatchError, HeapAutomaton, complement,
                       decide_nonempty, _fresh_name)
from .definite import DefiniteInfo, complete
from .heaps import (NIL, PointsTo, PredCall, PureAtom, Sid, SymbolicHeap, Var,
                    enumerate_unfoldings, mk_heap, pure_atom)
from .models import entails_reduced, generic_tight_model, sat_reduced
from .zoo import (TrackingState, build_property_automaton, check_property,
                  kernel_atoms, query_alpha, shrink, tracking_of,
                  ESTABLISHED, SAT)


class PreconditionError(ValueError):
    """An entailment precondition (establishment / determinedness) failed."""

    def __init__(self, check: str, message: str):
        super().__init__(f"{check}: {message}")
        self.check = check


class IncompleteClassSpecError(ValueError):
    """The membership oracle of an equivalence-class spec returned no class."""


# ---------------------------------------------------------------------------
# Determinedness


def is_determined(tau: SymbolicHeap) -> bool:
    """Sufficient syntactic check: every free variable is definitely
    allocated, or definitely equal to nil, or explicitly related (by a
    closed atom) to every other free variable.  Sound for the entailment
    procedure together with establishment; incomplete in general.
    """
    info = complete(tau)
    if info.inconsistent:
        return True
    free = list(range(1, tau.free_count + 1))
    for v in free:
        if info.allocated(v) or info.eq(v, NIL):
            continue
        if all(info.eq(v, w) or info.neq(v, w) for w in free if w != v):
            continue
        return False
    return True


def _sample_unfoldings(sid: Sid, phi: SymbolicHeap, height: int = 3,
                       cap: int = 4_000) -> list[SymbolicHeap]:
    try:
        return enumerate_unfoldings(sid, phi, height, cap)
    except Exception:
        return []


def well_determine(sid: Sid) -> Sid:
    """Refine by the satisfiability automaton: every unfolding of the result
    is satisfiable, languages otherwise unchanged (Algorithm line
    removeUnsat).  Determinedness of the inputs is the caller's obligation.
    """
    from .automata import refine
    sat = build_property_automaton(SAT, sid.max_arity())
    return refine(sid, sat).sid


# ---------------------------------------------------------------------------
# The heap automaton for acyclic singly-linked list segments

EQ_SEG, FWD_SEG, REV_SEG, FST_SEG, SND_SEG, BOT_SEG = \
    "q_eq", "q_neq", "q_rev", "q_fst", "q_snd", "q_bot"

_SLL_SPATIAL = {
    EQ_SEG: (),
    FWD_SEG: (PointsTo(1, (2,)),),
    REV_SEG: (PointsTo(2, (1,)),),
    FST_SEG: (PointsTo(1, (NIL,)),),
    SND_SEG: (PointsTo(2, (NIL,)),),
    BOT_SEG: (),
}

# minimal representation heaps of the six states, for documentation and the
# differential test against the Myhill-Nerode route
SLL_REPRESENTATIONS = {
    EQ_SEG: mk_heap(2, pure=[pure_atom(1, True, 2)]),
    FWD_SEG: mk_heap(2, spatial=[PointsTo(1, (2,))],
                     pure=[pure_atom(2, False, NIL), pure_atom(1, False, 2)]),
    REV_SEG: mk_heap(2, spatial=[PointsTo(2, (1,))],
                     pure=[pure_atom(1, False, NIL), pure_atom(1, False, 2)]),
    FST_SEG: mk_heap(2, spatial=[PointsTo(1, (NIL,))]),
    SND_SEG: mk_heap(2, spatial=[PointsTo(2, (NIL,))]),
    BOT_SEG: mk_heap(2, pure=[PureAtom(1, 1, False)]),
}


def classify_sll_segment(tau: SymbolicHeap) -> str:
    """Shape check deciding which segment class a reduced two-variable heap
    belongs to: starting at x1 (or x2), follow unique successors; the heap
    must be one simple chain consuming every cell, ending in x2, x1 or nil.

    Unsatisfiable heaps and every heap that cannot be extended to a list
    segment (branching cells, wide records, private endpoints, possible
    cycles) fall into the sink.
    """
    if tau.free_count != 2:
        raise AlphaMismatchError("the sll automaton handles two-variable heaps")
    info = complete(tau)
    if info.inconsistent:
        return BOT_SEG
    if not tau.spatial:
        return EQ_SEG
    if any(len(pt.targets) != 1 for pt in tau.spatial):
        return BOT_SEG
    sources = [pt.source for pt in tau.spatial]
    succ = {pt.source: pt.targets[0] for pt in tau.spatial}
    starts = [s for s in sources
              if not any(info.eq(s, t) for t in succ.values())]
    if len(starts) != 1:
        return BOT_SEG
    cur, visited = starts[0], []
    while True:
        visited.append(cur)
        nxt = succ[cur]
        step = [s for s in sources if s not in visited and info.eq(s, nxt)]
        if not step:
            end = nxt
            break
        if len(step) > 1:  # aliased sources would be inconsistent anyway
            return BOT_SEG
        cur = step[0]
    if len(visited) != len(sources):
        return BOT_SEG  # disconnected cells cannot join one chain
    if any(info.eq(end, s) for s in sources):
        return BOT_SEG  # the chain re-enters itself
    start = starts[0]

    def private_source_may_alias(endpoint) -> bool:
        # a source in no free-variable class can never be related to the
        # endpoint by any context; without an explicit disequality, cyclic
        # models remain possible forever
        return any(not info.eq(s, 1) and not info.eq(s, 2)
                   and not info.neq(s, endpoint) for s in sources)

    if info.eq(end, NIL):
        if info.eq(start, 1):
            return FST_SEG
        if info.eq(start, 2):
            return SND_SEG
        return BOT_SEG
    if info.eq(start, 1) and info.eq(end, 2):
        return BOT_SEG if private_source_may_alias(end) else FWD_SEG
    if info.eq(start, 2) and info.eq(end, 1):
        return BOT_SEG if private_source_may_alias(end) else REV_SEG
    return BOT_SEG


def _sll_final(seg: str, track: TrackingState) -> bool:
    if seg == FWD_SEG:
        # a forward chain is a segment only once every allocated class is
        # explicitly apart from the endpoint (else cyclic models remain)
        return all(pure_atom(a, False, 2) in track.pure for a in track.alloc)
    if seg == EQ_SEG:
        return pure_atom(1, True, 2) in track.pure
    if seg == FST_SEG:
        return pure_atom(NIL, True, 2) in track.pure
    return False


class _PayloadAutomaton(HeapAutomaton):
    """Shared skeleton: states (payload, TrackingState); the tracking part
    advances through the standard tracking kernels, the payload by
    substituting per-call representation heaps carrying the tracked pure.

    U-set automata accept unsatisfiable heaps vacuously; the generic
    Myhill-Nerode builder turns that off and follows its class flags only.
    """

    deterministic = True
    vacuous_acceptance = True

    def __init__(self, alpha: int):
        self.alpha = alpha

    # payload interface ------------------------------------------------
    def classify(self, tau: SymbolicHeap) -> object:
        raise NotImplementedError

    def payload_spatial(self, payload) -> tuple[PointsTo, ...]:
        raise NotImplementedError

    def payload_extra_pure(self, payload) -> tuple[PureAtom, ...]:
        return ()

    def payload_final(self, payload, track: TrackingState) -> bool:
        raise NotImplementedError

    # ---------------------------------------------------------------

    def _payload_shrunk(self, body: SymbolicHeap, inputs) -> SymbolicHeap:
        spatial = list(body.spatial)
        pure = set(body.pure)
        for call, (payload, track) in zip(body.calls, inputs):
            if len(call.args) != track.arity:
                raise AlphaMismatchError(f"state arity mismatch on {call}")
            mapping = {0: NIL, **{i: a for i, a in enumerate(call.args, start=1)}}
            for pt in self.payload_spatial(payload):
                spatial.append(PointsTo(mapping[pt.source],
                                        tuple(mapping[t] for t in pt.targets)))
            for a in itertools.chain(track.pure, self.payload_extra_pure(payload)):
                pure.add(pure_atom(mapping[a.lhs], a.eq, mapping[a.rhs]))
        return SymbolicHeap(body.free_count, body.bound_count, tuple(spatial),
                            (), frozenset(pure))

    def targets(self, body, inputs):
        if len(inputs) != len(body.calls):
            raise ValueError("one input state per predicate call required")
        track_inputs = [track for _, track in inputs]
        track = tracking_of(complete(shrink(body, track_inputs)), body.free_count)
        payload = self.classify(self._payload_shrunk(body, inputs))
        return [(payload, track)]

    def accepts_state(self, tau: SymbolicHeap):
        (state,) = self.targets(tau, ())
        return state

    def is_final(self, state):
        payload, track = state
        if self.vacuous_acceptance and track.inconsistent:
            return True  # an unsatisfiable heap entails anything vacuously
        return self.payload_final(payload, track)


class SllEntailmentAutomaton(_PayloadAutomaton):
    """Six-state automaton accepting the reduced two-variable heaps that
    entail an acyclic list segment from x1 to x2 (states: empty segment,
    forward chain, reversed chain, nil-terminated chain from either end,
    and a sink)."""

    def __init__(self):
        super().__init__(alpha=2)

    def classify(self, tau):
        return classify_sll_segment(tau)

    def payload_spatial(self, payload):
        return _SLL_SPATIAL[payload]

    def payload_extra_pure(self, payload):
        if payload == BOT_SEG:
            return (PureAtom(1, 1, False),)
        return ()

    def payload_final(self, payload, track):
        return _sll_final(payload, track)


def sll_entailment_automaton() -> SllEntailmentAutomaton:
    return SllEntailmentAutomaton()


# ---------------------------------------------------------------------------
# Generic Myhill-Nerode style builder


@dataclass(frozen=True)
class EquivalenceClassSpec:
    """Finitely many extension classes of reduced heaps with representatives
    and a (total, user-supplied) membership oracle."""

    classes: tuple[tuple[str, SymbolicHeap, bool], ...]
    membership: Callable[[SymbolicHeap], Optional[str]]

    def __post_init__(self):
        for name, rep, _ in self.classes:
            got = self.membership(rep)
            if got != name:
                raise ValueError(
                    f"representative of class {name!r} classified as {got!r}; "
                    f"representatives must be pairwise non-equivalent")

    def representative(self, name: str) -> SymbolicHeap:
        for cname, rep, _ in self.classes:
            if cname == name:
                return rep
        raise KeyError(name)

    def final(self, name: str) -> bool:
        for cname, _, fin in self.classes:
            if cname == name:
                return fin
        raise KeyError(name)


class MyhillNerodeAutomaton(_PayloadAutomaton):
    """Automaton whose payload is the oracle's class of the heap obtained by
    substituting class representatives (with tracked pure) for the calls.
    Finality follows the class flags literally, so specs must flag a class
    of unsatisfiable heaps themselves if vacuous members are wanted."""

    vacuous_acceptance = False

    def __init__(self, spec: EquivalenceClassSpec, alpha: int):
        super().__init__(alpha)
        self.spec = spec

    def classify(self, tau):
        name = self.spec.membership(tau)
        if name is None:
            raise IncompleteClassSpecError(f"no class covers {tau}")
        return name

    def payload_spatial(self, payload):
        rep = self.spec.representative(payload)
        if rep.bound_count:
            raise ValueError("class representatives must be quantifier-free")
        return rep.spatial

    def payload_extra_pure(self, payload):
        return tuple(self.spec.representative(payload).pure)

    def payload_final(self, payload, track):
        return self.spec.final(payload)


def myhill_nerode_automaton(spec: EquivalenceClassSpec,
                            alpha: int) -> MyhillNerodeAutomaton:
    return MyhillNerodeAutomaton(spec, alpha)


def sll_class_spec() -> EquivalenceClassSpec:
    """The segment classes as an equivalence-class spec, with finality
    refined by the pure facts the finals depend on (empty segments need the
    explicit x1 = x2; nil-terminated chains need x2 = nil).  Unsatisfiable
    heaps form their own accepting class (vacuous members of the language).
    """

    def membership(tau: SymbolicHeap) -> str:
        track = tracking_of(complete(tau), 2)
        if track.inconsistent:
            return "unsat"
        seg = classify_sll_segment(tau)
        if seg == EQ_SEG:
            return "eq" if pure_atom(1, True, 2) in track.pure else "eq0"
        if seg == FST_SEG:
            return "fst" if pure_atom(NIL, True, 2) in track.pure else "fst0"
        return {FWD_SEG: "fwd", REV_SEG: "rev", SND_SEG: "snd", BOT_SEG: "bot"}[seg]

    classes = (
        ("eq", SLL_REPRESENTATIONS[EQ_SEG], True),
        ("eq0", mk_heap(2), False),
        ("fwd", SLL_REPRESENTATIONS[FWD_SEG], True),
        ("rev", SLL_REPRESENTATIONS[REV_SEG], False),
        ("fst", mk_heap(2, spatial=[PointsTo(1, (NIL,))],
                        pure=[pure_atom(2, True, NIL)]), True),
        ("fst0", SLL_REPRESENTATIONS[FST_SEG], False),
        ("snd", SLL_REPRESENTATIONS[SND_SEG], False),
        ("bot", mk_heap(2, spatial=[PointsTo(1, (1,))]), False),
        ("unsat", SLL_REPRESENTATIONS[BOT_SEG], True),
    )
    return EquivalenceClassSpec(classes, membership)


# ---------------------------------------------------------------------------
# Per-connective constructions for U(rhs)


class EmpEntailmentAutomaton(_PayloadAutomaton):
    """Accepts reduced heaps entailing emp: empty spatial part (any pure),
    plus unsatisfiable heaps (vacuous entailment)."""

    def classify(self, tau):
        return "emp" if not tau.spatial else "cell"

    def payload_spatial(self, payload):
        if payload == "cell":
            return (PointsTo(-1, (-1,)),)
        return ()

    def _payload_shrunk(self, body, inputs):
        # private cells keep their privacy: give each kernel cell its own
        # quantifier instead of reusing variables across calls
        spatial = list(body.spatial)
        pure = set(body.pure)
        bound = body.bound_count
        for call, (payload, track) in zip(body.calls, inputs):
            mapping = {0: NIL, **{i: a for i, a in enumerate(call.args, start=1)}}
            if payload == "cell":
                bound += 1
                spatial.append(PointsTo(-bound, (-bound,)))
            for a in track.pure:
                pure.add(pure_atom(mapping[a.lhs], a.eq, mapping[a.rhs]))
        return SymbolicHeap(body.free_count, bound, tuple(spatial), (),
                            frozenset(pure))

    def payload_final(self, payload, track):
        return payload == "emp" or track.inconsistent


class PointsToEntailmentAutomaton(_PayloadAutomaton):
    """Accepts reduced heaps entailing one fixed points-to assertion
    x_{u0} -> (x_{u1} .. x_{un}) over the rhs's free variables (position 0
    is nil).  The payload records how many cells the heap carries and, for
    single-cell heaps, every assertion shape the cell definitely matches.
    """

    def __init__(self, target: tuple[int, ...], alpha: int):
        super().__init__(alpha)
        if len(target) < 2 or target[0] == 0:
            raise ValueError("target must be (source, field...) with non-nil source")
        self.target = target
        self.arity = len(target) - 1

    def classify(self, tau):
        info = complete(tau)
        if info.inconsistent:
            return (min(2, len(tau.spatial)), None)  # vacuous member
        n = len(tau.spatial)
        if n != 1:
            return (min(2, n), frozenset())
        return (1, self._matches(tau.spatial[0], info, tau.free_count))

    def _matches(self, cell: PointsTo, info: DefiniteInfo, fv: int):
        if len(cell.targets) != self.arity:
            return frozenset()
        positions = range(0, fv + 1)
        out = []
        src_opts = [p for p in positions if p != 0 and info.eq(p, cell.source)]
        tgt_opts = [[p for p in positions if info.eq(p, t)] for t in cell.targets]
        for combo in itertools.product(src_opts, *tgt_opts):
            out.append(tuple(combo))
        return frozenset(out)

    def payload_spatial(self, payload):
        count, matched = payload
        if count == 1 and matched:
            u = min(matched)
            return (PointsTo(u[0], tuple(u[1:])),)
        return ()

    def _payload_shrunk(self, body, inputs):
        spatial = list(body.spatial)
        pure = set(body.pure)
        bound = body.bound_count
        for call, ((count, matched), track) in zip(body.calls, inputs):
            mapping = {0: NIL, **{i: a for i, a in enumerate(call.args, start=1)}}
            for a in track.pure:
                pure.add(pure_atom(mapping[a.lhs], a.eq, mapping[a.rhs]))
            if count == 1 and matched:
                u = min(matched)
                spatial.append(PointsTo(mapping[u[0]],
                                        tuple(mapping[t] for t in u[1:])))
            else:
                # unmatched or many cells: keep the count with private cells
                for _ in range(count):
                    bound += 1
                    spatial.append(PointsTo(-bound, (-bound,)))
        return SymbolicHeap(body.free_count, bound, tuple(spatial), (),
                            frozenset(pure))

    def payload_final(self, payload, track):
        count, matched = payload
        if track.inconsistent or matched is None:
            return True
        return count == 1 and self.target in matched


def _collect_tracks(state, acc: list):
    if isinstance(state, TrackingState):
        acc.append(state)
    elif isinstance(state, tuple):
        for part in state:
            _collect_tracks(part, acc)


def merged_track(state) -> TrackingState:
    """The tracking knowledge represented by a (possibly nested composite)
    entailment-automaton state: union of every embedded tracking component.
    Sides of a separating conjunction abstract parts of one heap, so their
    allocation sets and pure facts all hold of the whole."""
    tracks: list[TrackingState] = []
    _collect_tracks(state, tracks)
    if not tracks:
        raise ValueError(f"state {state!r} carries no tracking component")
    arity = tracks[0].arity
    alloc = frozenset().union(*(t.alloc for t in tracks))
    pure = frozenset().union(*(t.pure for t in tracks))
    return TrackingState(arity, alloc, pure)


class PureConjunctionAutomaton(HeapAutomaton):
    """U(psi : Pi) from U(psi): additionally every atom of Pi must be a
    definite relation of the heap (read off the tracking component)."""

    deterministic = True

    def __init__(self, inner: HeapAutomaton, atoms: frozenset[PureAtom]):
        self.inner = inner
        self.atoms = atoms
        self.alpha = inner.alpha

    def targets(self, body, inputs):
        return self.inner.targets(body, inputs)

    def is_final(self, state):
        if not self.inner.is_final(state):
            return False
        track = merged_track(state)
        return track.inconsistent or all(a in track.pure for a in self.atoms)


class PermutedArgsAutomaton(HeapAutomaton):
    """Adapter for a predicate call whose arguments permute the free
    variables: accepts tau iff the inner automaton accepts tau with its free
    variables renamed accordingly."""

    def __init__(self, inner: HeapAutomaton, args: tuple[int, ...]):
        if sorted(args) != list(range(1, len(args) + 1)):
            raise NotImplementedError(
                "only permutations of distinct free variables are supported "
                "as right-hand-side call arguments")
        self.inner = inner
        self.alpha = inner.alpha
        self.deterministic = inner.deterministic
        self.mapping = {args[i]: i + 1 for i in range(len(args))}

    def _rename(self, body: SymbolicHeap) -> SymbolicHeap:
        f = lambda v: self.mapping.get(v, v) if v > 0 else v
        return body.map_vars(f, body.free_count, body.bound_count)

    def targets(self, body, inputs):
        return self.inner.targets(self._rename(body), inputs)

    def is_final(self, state):
        return self.inner.is_final(state)


class SeparatingConjunctionAutomaton(HeapAutomaton):
    """U(psi1 * psi2): split the spatial atoms of the core (inequalities
    between allocated variables dropped, pure duplicated), keep every call
    on both sides, and run both component automata.  Nondeterministic in
    the choice of split; exponential in the number of cells, which is fine
    at rule-body scale.

    States additionally carry the exact tracking state of the *unsplit*
    heap: the sides alone cannot see cross-side inconsistency (two sides
    may allocate the same variable), which must accept vacuously.
    """

    deterministic = False

    def __init__(self, left: HeapAutomaton, right: HeapAutomaton):
        if left.alpha != right.alpha:
            raise AlphaMismatchError("separating conjuncts with different alpha")
        self.left, self.right = left, right
        self.alpha = left.alpha

    def _core_pure(self, body: SymbolicHeap, info: DefiniteInfo) -> frozenset[PureAtom]:
        if info.inconsistent:
            return body.pure
        allocated = {v for v in info.variables if info.allocated(v)} | {NIL}
        return frozenset(a for a in body.pure
                         if a.eq or a.lhs not in allocated or a.rhs not in allocated)

    def targets(self, body, inputs):
        lefts_in = [q[0] for q in inputs]
        rights_in = [q[1] for q in inputs]
        whole_tracks = [q[2] for q in inputs]
        whole_info = complete(shrink(body, whole_tracks))
        whole_track = tracking_of(whole_info, body.free_count)
        core_pure = self._core_pure(body, whole_info)
        out = []
        cells = list(body.spatial)
        for mask in range(1 << len(cells)):
            left_cells = tuple(c for i, c in enumerate(cells) if mask >> i & 1)
            right_cells = tuple(c for i, c in enumerate(cells) if not mask >> i & 1)
            left_body = SymbolicHeap(body.free_count, body.bound_count, left_cells,
                                     body.calls, core_pure)
            right_body = SymbolicHeap(body.free_count, body.bound_count, right_cells,
                                      body.calls, core_pure)
            for ql in self.left.targets(left_body, lefts_in):
                for qr in self.right.targets(right_body, rights_in):
                    out.append((ql, qr, whole_track))
        seen, dedup = set(), []
        for s in out:
            if s not in seen:
                seen.add(s)
                dedup.append(s)
        return dedup

    def is_final(self, state):
        ql, qr, whole_track = state
        if whole_track.inconsistent:
            return True
        return self.left.is_final(ql) and self.right.is_final(qr)


class ExistentialEntailmentAutomaton(HeapAutomaton):
    """U(ex x . psi) from U(psi), where x is psi's last free variable: a
    heap entails ex x . psi iff pinning x to one of its variables (or nil)
    yields a heap entailing psi.  The pin may happen at any node of an
    unfolding tree; the flag records whether it already did."""

    deterministic = False

    def __init__(self, inner: HeapAutomaton):
        self.inner = inner
        self.alpha = inner.alpha

    def _extended(self, body: SymbolicHeap, call_flags, pin: Optional[Var]):
        """body with one extra free variable x; calls with a set flag pass x
        as an extra last argument, and ``pin`` (if given) equates x with an
        existing variable."""
        x = body.free_count + 1
        calls = tuple(
            PredCall(c.predicate, c.args + (x,)) if flag else c
            for c, flag in zip(body.calls, call_flags))
        pure = body.pure
        if pin is not None:
            pure = pure | {pure_atom(x, True, pin)}
        return SymbolicHeap(x, body.bound_count, body.spatial, calls, pure)

    def targets(self, body, inputs):
        out = []
        inner_inputs = [q[0] for q in inputs]
        flags = [q[1] for q in inputs]
        if all(not f for f in flags):
            # x not introduced yet: stay below, or pin it here
            for q in self.inner.targets(body, inner_inputs):
                out.append((q, False))
            candidates = [NIL, *range(1, body.free_count + 1),
                          *(-k for k in range(1, body.bound_count + 1))]
            for pin in candidates:
                extended = self._extended(body, [False] * len(flags), pin)
                for q in self.inner.targets(extended, inner_inputs):
                    out.append((q, True))
        elif sum(flags) == 1:
            extended = self._extended(body, flags, None)
            for q in self.inner.targets(extended, inner_inputs):
                out.append((q, True))
        seen, dedup = set(), []
        for s in out:
            if s not in seen:
                seen.add(s)
                dedup.append(s)
        return dedup

    def is_final(self, state):
        return state[1] and self.inner.is_final(state[0])


def build_entailment_automaton(rhs: SymbolicHeap,
                               pred_automata: Mapping[str, HeapAutomaton],
                               alpha: int) -> HeapAutomaton:
    """Automaton accepting U(rhs), built by recursion on the rhs syntax.

    Spatial atoms and predicate calls are combined with the separating
    conjunction construction, then the pure part is conjoined and the
    existentials are discharged innermost-first by nondeterministic
    pinning.  Predicate calls take their automaton from ``pred_automata``
    (argument tuples must permute the free variables).
    """
    conjuncts: list[HeapAutomaton] = []
    inner_fv = rhs.free_count + rhs.bound_count

    def shift_bound(v: Var) -> Var:
        return rhs.free_count - v if v < 0 else v

    for pt in rhs.spatial:
        target = tuple(shift_bound(v) for v in (pt.source, *pt.targets))
        conjuncts.append(PointsToEntailmentAutomaton(target, alpha))
    for call in rhs.calls:
        if call.predicate not in pred_automata:
            raise KeyError(f"no automaton provided for predicate {call.predicate}")
        inner = pred_automata[call.predicate]
        args = tuple(shift_bound(a) for a in call.args)
        if args == tuple(range(1, len(args) + 1)) and inner_fv == len(args):
            conjuncts.append(inner)
        else:
            if inner_fv != len(args):
                raise NotImplementedError(
                    "right-hand sides mixing a call with extra variables or "
                    "atoms under the same quantifier prefix need the call "
                    "arguments to cover all variables")
            conjuncts.append(PermutedArgsAutomaton(inner, args))
    if not conjuncts:
        automaton: HeapAutomaton = EmpEntailmentAutomaton(alpha)
    else:
        automaton = conjuncts[0]
        for nxt in conjuncts[1:]:
            automaton = SeparatingConjunctionAutomaton(automaton, nxt)
    pure = frozenset(pure_atom(shift_bound(a.lhs), a.eq, shift_bound(a.rhs))
                     for a in rhs.pure)
    if pure:
        automaton = PureConjunctionAutomaton(automaton, pure)
    for _ in range(rhs.bound_count):
        automaton = ExistentialEntailmentAutomaton(automaton)
    return automaton


# ---------------------------------------------------------------------------
# The decision procedure


@dataclass(frozen=True)
class EntailmentQuery:
    sid: Sid
    lhs: SymbolicHeap
    rhs: SymbolicHeap
    pred_automata: Mapping[str, HeapAutomaton]


def pred_call_entails(sid: Sid, lhs_pred: str, rhs_pred: str,
                      height: int = 4, cap: int = 20_000) -> bool:
    """Bounded oracle for entailment between predicate calls of a
    well-determined SID: every lhs unfolding (to the given height) must
    entail some rhs unfolding via the one-model check."""
    arity = sid.arity(lhs_pred)
    if arity != sid.arity(rhs_pred):
        raise ValueError("predicates of different arity")
    lhs_call = mk_heap(arity, calls=[PredCall(lhs_pred, tuple(range(1, arity + 1)))])
    rhs_call = mk_heap(arity, calls=[PredCall(rhs_pred, tuple(range(1, arity + 1)))])
    lhs_unfoldings = enumerate_unfoldings(sid, lhs_call, height, cap)
    rhs_unfoldings = enumerate_unfoldings(sid, rhs_call, height + 1, cap)
    for u in lhs_unfoldings:
        if complete(u).inconsistent:
            continue
        if not is_determined(u):
            raise PreconditionError("determinedness", f"unfolding {u} is not determined")
        if not any(entails_reduced(u, r) for r in rhs_unfoldings):
            return False
    return True


def decide_entailment(query: EntailmentQuery, check_preconditions: bool = True) -> bool:
    """Does lhs entail rhs under the SID?

    Procedure: add a fresh predicate for the lhs, refine away unsatisfiable
    unfoldings, build the U(rhs) automaton, and test the refined predicate
    against its complement for emptiness.
    """
    sid, lhs, rhs = query.sid, query.lhs, query.rhs
    if lhs.free_count != rhs.free_count:
        raise PreconditionError("free-variables",
                                "lhs and rhs must share the free-variable tuple")
    name = _fresh_name(sid, "__lhs")
    omega = sid.extended(name, lhs.free_count, [lhs])
    if check_preconditions:
        _check_preconditions(omega, name, lhs, rhs, sid)
    alpha = max(query_alpha(sid, lhs), rhs.free_count)
    refined = well_determine(omega)
    automaton = build_entailment_automaton(rhs, query.pred_automata, alpha)
    found, _ = decide_nonempty(refined, name, complement(automaton))
    return not found


def _check_preconditions(omega: Sid, lhs_name: str, lhs, rhs, sid: Sid):
    for pred in omega.names():
        arity = omega.arity(pred)
        call = mk_heap(arity, calls=[PredCall(pred, tuple(range(1, arity + 1)))])
        if not check_property(omega, call, ESTABLISHED, "forall"):
            raise PreconditionError("establishment",
                                    f"predicate {pred} is not established")
    for label, phi in (("lhs", lhs), ("rhs", rhs)):
        for u in _sample_unfoldings(sid if label == "rhs" else omega, phi):
            if not complete(u).inconsistent and not is_determined(u):
                raise PreconditionError("determinedness",
                                        f"{label} unfolding {u} is not determined")
