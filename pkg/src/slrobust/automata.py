"""Heap automata: language membership, SID refinement, on-the-fly emptiness
with witness extraction, and boolean combinators.

A heap automaton assigns states to symbolic heaps bottom-up: a transition
consumes a rule body together with one input state per predicate call and
yields output states.  All automata here expose a *target-enumerating*
interface (``targets``) rather than a relation test; deterministic automata
return a single target, which keeps the worklist exploration away from the
(astronomically large) full state spaces.
"""

from __future__ import annotations

import itertools
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Hashable, Optional, Sequence

from .heaps import (PredCall, Sid, SymbolicHeap, UnfoldingTree, mk_heap, unfold)

State = Hashable


class AlphaMismatchError(ValueError):
    """Automaton cannot handle the free variables / call arities involved."""


class HeapAutomaton(ABC):
    """Finite-state acceptor of reduced symbolic heaps with a compositional
    transition relation over rule bodies.

    ``alpha`` bounds the free-variable count / call arity the automaton
    handles.  ``deterministic`` automata have at most one target per input;
    their complement is a final-state swap instead of a powerset build.
    """

    alpha: int = 0
    deterministic: bool = False

    @abstractmethod
    def targets(self, body: SymbolicHeap, inputs: Sequence[State]) -> list[State]:
        """Output states of the transition on ``body`` with per-call inputs."""

    @abstractmethod
    def is_final(self, state: State) -> bool:
        ...

    def accepts(self, tau: SymbolicHeap) -> bool:
        if not tau.is_reduced:
            raise ValueError("accepts() expects a reduced symbolic heap")
        return any(self.is_final(q) for q in self.targets(tau, ()))


def _dedup(states) -> list[State]:
    seen, out = set(), []
    for s in states:
        if s not in seen:
            seen.add(s)
            out.append(s)
    return out


# ---------------------------------------------------------------------------
# Boolean combinators (union / intersection / complement)

_BOT = ("_bot",)


class UnionAutomaton(HeapAutomaton):
    """Runs either component, padding the other side with a bottom state."""

    def __init__(self, left: HeapAutomaton, right: HeapAutomaton):
        if left.alpha != right.alpha:
            raise AlphaMismatchError("union of automata with different alpha")
        self.left, self.right = left, right
        self.alpha = left.alpha
        self.deterministic = False

    def targets(self, body, inputs):
        out = []
        if all(q[1] is _BOT for q in inputs):
            out.extend((p, _BOT) for p in self.left.targets(body, [q[0] for q in inputs]))
        if all(q[0] is _BOT for q in inputs):
            out.extend((_BOT, p) for p in self.right.targets(body, [q[1] for q in inputs]))
        return _dedup(out)

    def is_final(self, state):
        p, q = state
        return (q is _BOT and self.left.is_final(p)) or \
               (p is _BOT and self.right.is_final(q))


class IntersectionAutomaton(HeapAutomaton):
    def __init__(self, left: HeapAutomaton, right: HeapAutomaton):
        if left.alpha != right.alpha:
            raise AlphaMismatchError("intersection of automata with different alpha")
        self.left, self.right = left, right
        self.alpha = left.alpha
        self.deterministic = left.deterministic and right.deterministic

    def targets(self, body, inputs):
        lefts = self.left.targets(body, [q[0] for q in inputs])
        rights = self.right.targets(body, [q[1] for q in inputs])
        return _dedup((p, q) for p in lefts for q in rights)

    def is_final(self, state):
        return self.left.is_final(state[0]) and self.right.is_final(state[1])


class FinalSwapAutomaton(HeapAutomaton):
    """Complement of a deterministic automaton: swap final and non-final."""

    def __init__(self, base: HeapAutomaton):
        if not base.deterministic:
            raise ValueError("final swap requires a deterministic automaton")
        self.base = base
        self.alpha = base.alpha
        self.deterministic = True

    def targets(self, body, inputs):
        return self.base.targets(body, inputs)

    def is_final(self, state):
        return not self.base.is_final(state)


class PowersetComplementAutomaton(HeapAutomaton):
    """Complement via the functional subset construction: the unique target
    on inputs X1..Xm is {q0 | exists q in product(Xi), q0 in targets(body, q)}.
    """

    def __init__(self, base: HeapAutomaton):
        self.base = base
        self.alpha = base.alpha
        self.deterministic = True

    def targets(self, body, inputs):
        acc = set()
        for q in itertools.product(*[sorted(x, key=repr) for x in inputs]):
            acc.update(self.base.targets(body, list(q)))
        return [frozenset(acc)]

    def is_final(self, state):
        return not any(self.base.is_final(q) for q in state)


def boolean_combine(op: str, a: HeapAutomaton, b: HeapAutomaton) -> HeapAutomaton:
    if op == "union":
        return UnionAutomaton(a, b)
    if op == "intersection":
        return IntersectionAutomaton(a, b)
    raise ValueError(f"unknown combinator {op!r}")


def complement(a: HeapAutomaton) -> HeapAutomaton:
    return FinalSwapAutomaton(a) if a.deterministic else PowersetComplementAutomaton(a)


class WithFinals(HeapAutomaton):
    """Same transitions as the base automaton, custom final-state predicate."""

    def __init__(self, base: HeapAutomaton, final_pred):
        self.base = base
        self.final_pred = final_pred
        self.alpha = base.alpha
        self.deterministic = base.deterministic

    def targets(self, body, inputs):
        return self.base.targets(body, inputs)

    def is_final(self, state):
        return self.final_pred(state)


# ---------------------------------------------------------------------------
# On-the-fly refinement / emptiness (worklist over predicate-state pairs)


@dataclass
class DiscoveryTable:
    """Result of the worklist exploration.

    ``order`` lists (predicate, state) pairs in discovery order; ``rules``
    maps each pair to the (rule_index, child pairs) that first produced it,
    for witness reconstruction.
    """

    order: list[tuple[str, State]] = field(default_factory=list)
    rules: dict[tuple[str, State], tuple[int, tuple[tuple[str, State], ...]]] = \
        field(default_factory=dict)
    states_of: dict[str, list[State]] = field(default_factory=dict)

    def add(self, pred: str, state: State, rule_idx: int,
            children: tuple[tuple[str, State], ...]) -> bool:
        if (pred, state) in self.rules:
            return False
        self.order.append((pred, state))
        self.rules[(pred, state)] = (rule_idx, children)
        self.states_of.setdefault(pred, []).append(state)
        return True

    def states_discovered(self) -> int:
        return len(self.order)


def _explore(sid: Sid, automaton: HeapAutomaton,
             stop_pred: Optional[str] = None) -> tuple[bool, DiscoveryTable]:
    """Algorithm: saturate R <= Pred x Q under the transition relation.

    FIFO over (rule, input-tuple) combinations with input tuples drawn from
    the table in discovery order, so runs are reproducible.  With
    ``stop_pred`` set, stops as soon as a final state for it is discovered.
    """
    table = DiscoveryTable()
    done: set[tuple[str, int, tuple[State, ...]]] = set()
    changed = True
    while changed:
        changed = False
        for name, _, rules in sid.preds:
            for rule_idx, body in enumerate(rules):
                pools = [list(table.states_of.get(c.predicate, [])) for c in body.calls]
                for combo in itertools.product(*pools):
                    key = (name, rule_idx, combo)
                    if key in done:
                        continue
                    done.add(key)
                    children = tuple((c.predicate, q)
                                     for c, q in zip(body.calls, combo))
                    for q0 in automaton.targets(body, list(combo)):
                        if table.add(name, q0, rule_idx, children):
                            changed = True
                            if stop_pred == name and automaton.is_final(q0):
                                return True, table
    if stop_pred is not None:
        found = any(automaton.is_final(q)
                    for q in table.states_of.get(stop_pred, []))
        return found, table
    return False, table


def decide_nonempty(sid: Sid, pred: str, automaton: HeapAutomaton
                    ) -> tuple[bool, DiscoveryTable]:
    """Is some unfolding of ``pred`` accepted?  Also returns the discovery
    table for witness reconstruction."""
    if pred not in sid:
        raise KeyError(f"unknown predicate {pred}")
    return _explore(sid, automaton, stop_pred=pred)


def explore_states(sid: Sid, automaton: HeapAutomaton) -> DiscoveryTable:
    """Saturate the reachable (predicate, state) pairs without early exit.

    For a deterministic automaton the one table answers both quantifiers
    over a predicate's unfoldings: some unfolding is accepted iff some
    discovered state is final, and all are accepted iff all discovered
    states are final.
    """
    _, table = _explore(sid, automaton)
    return table


@dataclass(frozen=True)
class RefinedSid:
    """Refinement of a SID by an automaton: pair predicates (P, q) plus
    dispatch rules P <= (P, q) for final q.  Only worklist-reachable pairs
    are materialized (language-equal to the full construction)."""

    sid: Sid
    pair_names: dict[tuple[str, State], str]
    provenance: dict[tuple[str, int], tuple[str, int, tuple[State, ...]]]
    table: DiscoveryTable


def refine(sid: Sid, automaton: HeapAutomaton) -> RefinedSid:
    """Build a SID whose dispatch predicate P unfolds to exactly
    { u in unfoldings(P) | u accepted by the automaton }."""
    _, table = _explore(sid, automaton)
    pair_names: dict[tuple[str, State], str] = {}
    for pred, state in table.order:
        pair_names[(pred, state)] = f"{pred}__q{table.states_of[pred].index(state)}"

    new_rules: dict[str, list[SymbolicHeap]] = {name: [] for name in sid.names()}
    for name in table.states_of:
        for state in table.states_of[name]:
            new_rules.setdefault(pair_names[(name, state)], [])
    provenance: dict[tuple[str, int], tuple[str, int, tuple[State, ...]]] = {}

    # dispatch rules first: P <= (P, q) for final q
    for name, arity, _ in sid.preds:
        for state in table.states_of.get(name, []):
            if automaton.is_final(state):
                call = PredCall(pair_names[(name, state)], tuple(range(1, arity + 1)))
                new_rules[name].append(mk_heap(arity, calls=[call]))

    # pair rules: one per discovered (rule, input combo, target); the table is
    # already saturated, so a single sweep enumerates them all
    for name, _, rules in sid.preds:
        for rule_idx, body in enumerate(rules):
            pools = [table.states_of.get(c.predicate, []) for c in body.calls]
            for combo in itertools.product(*pools):
                for q0 in automaton.targets(body, list(combo)):
                    if (name, q0) not in pair_names:
                        continue
                    renamed = tuple(
                        PredCall(pair_names[(c.predicate, q)], c.args)
                        for c, q in zip(body.calls, combo))
                    new_body = SymbolicHeap(body.free_count, body.bound_count,
                                            body.spatial, renamed, body.pure)
                    target_pred = pair_names[(name, q0)]
                    provenance[(target_pred, len(new_rules[target_pred]))] = \
                        (name, rule_idx, combo)
                    new_rules[target_pred].append(new_body)

    preds = []
    for name, arity, _ in sid.preds:
        preds.append((name, arity, tuple(new_rules[name])))
        for state in table.states_of.get(name, []):
            pname = pair_names[(name, state)]
            preds.append((pname, arity, tuple(new_rules[pname])))
    return RefinedSid(Sid(tuple(preds)), pair_names, provenance, table)


def witness_unfolding(sid: Sid, pred: str, automaton: HeapAutomaton
                      ) -> Optional[UnfoldingTree]:
    """A minimal-discovery-order unfolding tree of ``pred`` accepted by the
    automaton, or None when the intersection is empty.  The witness is
    re-verified before being returned."""
    found, table = decide_nonempty(sid, pred, automaton)
    if not found:
        return None
    state = next(q for q in table.states_of[pred] if automaton.is_final(q))

    def build(pair) -> UnfoldingTree:
        name, _ = pair
        rule_idx, children = table.rules[pair]
        return UnfoldingTree(sid.rules(name)[rule_idx],
                             tuple(build(c) for c in children), (name, rule_idx))

    tree = build((pred, state))
    reduced = unfold(tree)
    if not automaton.accepts(reduced):
        raise AssertionError("witness verification failed; automaton is not compositional")
    return tree


# ---------------------------------------------------------------------------
# Queries over arbitrary formulas


def _fresh_name(sid: Sid, base: str = "__query") -> str:
    name = base
    k = 0
    while name in sid:
        k += 1
        name = f"{base}{k}"
    return name


def exists_accepted(sid: Sid, phi: SymbolicHeap, automaton: HeapAutomaton) -> bool:
    """Is some unfolding of ``phi`` (w.r.t. the SID) accepted?"""
    name = _fresh_name(sid)
    extended = sid.extended(name, phi.free_count, [phi])
    return decide_nonempty(extended, name, automaton)[0]


def all_accepted(sid: Sid, phi: SymbolicHeap, automaton: HeapAutomaton) -> bool:
    """Are all unfoldings of ``phi`` accepted?  (X <= Y iff X & ~Y = empty.)"""
    return not exists_accepted(sid, phi, complement(automaton))
