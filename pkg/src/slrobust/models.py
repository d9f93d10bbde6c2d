"""Stack-heap models and satisfaction of reduced symbolic heaps.

Values are naturals with 0 reserved for nil; locations are values >= 1.
Models are tight: the stack interprets exactly the free variables of the
heap under evaluation and the heap domain is exactly the spatial footprint.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .definite import complete
from .heaps import NIL, SymbolicHeap, Var, is_bound


class StackDomainError(ValueError):
    pass


class NotDeterminedError(ValueError):
    pass


class ModelCapExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class Model:
    """Stack (free-variable index -> value, nil fixed to 0) and heap."""

    stack: tuple[tuple[int, int], ...]
    heap: tuple[tuple[int, tuple[int, ...]], ...]

    def __post_init__(self):
        for loc, _ in self.heap:
            if loc == 0:
                raise ValueError("nil (0) can never be allocated")

    def stack_map(self) -> dict[int, int]:
        return dict(self.stack)

    def heap_map(self) -> dict[int, tuple[int, ...]]:
        return dict(self.heap)

    def canonical(self) -> "Model":
        """Relabel all values by first appearance (in stack order, then by a
        deterministic heap walk).  Two models of the same formula are
        isomorphic iff they canonicalize identically.  Canonical models are
        for deduplication only; satisfaction checks always use raw models.
        """
        relabel: dict[int, int] = {}

        def get(v: int) -> int:
            if v not in relabel:
                relabel[v] = len(relabel) + 1
            return relabel[v]

        stack = tuple((i, get(v)) for i, v in sorted(self.stack))
        # walk the heap visiting already-labelled locations first
        pending = self.heap_map()
        out = []
        while pending:
            labelled = [l for l in pending if l in relabel]
            nxt = min(labelled, key=lambda l: relabel[l]) if labelled else min(pending)
            out.append((get(nxt), tuple(get(t) for t in pending.pop(nxt))))
        return Model(stack, tuple(sorted(out)))


def mk_model(stack: dict[int, int], heap: dict[int, tuple[int, ...]]) -> Model:
    return Model(tuple(sorted(stack.items())), tuple(sorted(heap.items())))


def sat_reduced(tau: SymbolicHeap, m: Model) -> bool:
    """Does the (tight) model satisfy the reduced heap?

    Existentials are searched over the model's values plus 0 plus one fresh
    value, which suffices for equality/disequality satisfaction at this
    scale.
    """
    if not tau.is_reduced:
        raise ValueError("sat_reduced expects a reduced heap")
    stack = m.stack_map()
    if set(stack) != set(range(1, tau.free_count + 1)):
        raise StackDomainError(
            f"stack domain {sorted(stack)} != free variables of the heap "
            f"(1..{tau.free_count})")
    heap = m.heap_map()
    candidates = set(stack.values()) | set(heap) | {NIL}
    for tup in heap.values():
        candidates.update(tup)
    fresh = max(candidates, default=0) + 1
    candidates.add(fresh)
    domain = sorted(candidates)

    def value(v: Var, bound: dict[Var, int]) -> int:
        if v == NIL:
            return 0
        if v > 0:
            return stack[v]
        return bound[v]

    bound_vars = [-k for k in range(1, tau.bound_count + 1)]
    for assignment in itertools.product(domain, repeat=len(bound_vars)):
        bound = dict(zip(bound_vars, assignment))
        sources = [value(pt.source, bound) for pt in tau.spatial]
        if len(set(sources)) != len(sources) or 0 in sources:
            continue
        if set(sources) != set(heap):
            continue
        if any(heap[s] != tuple(value(t, bound) for t in pt.targets)
               for s, pt in zip(sources, tau.spatial)):
            continue
        ok = True
        for atom in tau.pure:
            a, b = value(atom.lhs, bound), value(atom.rhs, bound)
            if (a == b) != atom.eq:
                ok = False
                break
        if ok:
            return True
    return False


def enumerate_tight_models(tau: SymbolicHeap, cap: int = 200_000):
    """Raw enumeration of tight models with values in
    {0, ..., #spatial + #variables}; no isomorphism quotient."""
    if not tau.is_reduced:
        raise ValueError("tight model enumeration expects a reduced heap")
    n_vals = len(tau.spatial) + tau.free_count + tau.bound_count + 1
    domain = range(0, n_vals + 1)
    free_vars = list(range(1, tau.free_count + 1))
    bound_vars = [-k for k in range(1, tau.bound_count + 1)]
    count = 0
    for assignment in itertools.product(domain, repeat=len(free_vars) + len(bound_vars)):
        count += 1
        if count > cap:
            raise ModelCapExceeded(f"model enumeration exceeded {cap} assignments")
        env = dict(zip(free_vars + bound_vars, assignment))
        env[NIL] = 0
        sources = [env[pt.source] for pt in tau.spatial]
        if len(set(sources)) != len(sources) or 0 in sources:
            continue
        if any((env[atom.lhs] == env[atom.rhs]) != atom.eq for atom in tau.pure):
            continue
        heap = {env[pt.source]: tuple(env[t] for t in pt.targets) for pt in tau.spatial}
        yield mk_model({i: env[i] for i in free_vars}, heap)


def tight_models_bounded(tau: SymbolicHeap, cap: int = 200_000) -> list[Model]:
    """All tight models with values in {0, ..., #spatial + #variables},
    deduplicated up to value renaming.  Brute-force oracle device.
    """
    seen = {m.canonical() for m in enumerate_tight_models(tau, cap)}
    return sorted(seen, key=lambda m: (m.stack, m.heap))


def generic_tight_model(tau: SymbolicHeap) -> Model:
    """The canonical tight model of a consistent reduced heap.

    Every equality class not pinned to nil is placed at its own fresh
    location; the nil class sits at 0.  For well-determined heaps this is
    the unique tight model up to isomorphism.
    """
    info = complete(tau)
    if info.inconsistent:
        raise NotDeterminedError("inconsistent heap has no model")
    reps: dict[Var, int] = {}
    class_of: dict[Var, Var] = {}
    for v in info.variables:
        for w in info.variables:
            if info.eq(v, w):
                class_of[v] = w
                break
    next_loc = 1
    values: dict[Var, int] = {}
    for v in info.variables:
        rep = class_of[v]
        if rep not in reps:
            if info.eq(rep, NIL):
                reps[rep] = 0
            else:
                reps[rep] = next_loc
                next_loc += 1
        values[v] = reps[rep]
    heap = {values[pt.source]: tuple(values[t] for t in pt.targets)
            for pt in tau.spatial}
    stack = {i: values[i] for i in range(1, tau.free_count + 1)}
    return mk_model(stack, heap)


def entails_reduced(tau1: SymbolicHeap, tau2: SymbolicHeap) -> bool:
    """tau1 |= tau2 via a single model check on tau1's canonical tight model.

    Sound when tau1 is well-determined (one tight model up to isomorphism);
    callers must pre-check with :func:`slrobust.entailment.is_determined`.
    Variables not definitely related to nil are placed at non-nil values
    (the generic position).
    """
    if tau1.free_count != tau2.free_count:
        raise ValueError("entailment requires equal free-variable tuples")
    info = complete(tau1)
    if info.inconsistent:
        raise NotDeterminedError("entails_reduced on an unsatisfiable premise")
    return sat_reduced(tau2, generic_tight_model(tau1))
