"""Definite relationships of reduced symbolic heaps.

``complete`` computes the pure closure of a reduced heap: the given pure
atoms, seeded with source-of-points-to facts (sources are non-nil and
pairwise distinct), closed under equality reasoning (union-find) plus a
disequality propagation pass.  From the closure we read off which variables
are definitely equal/unequal, definitely allocated, and which definite
points-to edges exist, in every model of the heap.

Inconsistent heaps saturate: the closure becomes the full set of atoms and
alloc/points/reach hold for every variable and pair, so definite relations
are vacuously true on unsatisfiable heaps.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .heaps import NIL, PureAtom, SymbolicHeap, Var, pure_atom, var_key


class NotReducedError(ValueError):
    pass


class UnknownVariableError(KeyError):
    pass


class _UnionFind:
    def __init__(self, items):
        self.parent = {v: v for v in items}

    def find(self, v):
        p = self.parent[v]
        while p != self.parent[p]:
            p = self.parent[p]
        while self.parent[v] != p:  # path compression
            self.parent[v], v = p, self.parent[v]
        return p

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # keep the smallest variable as representative
            if var_key(rb) < var_key(ra):
                ra, rb = rb, ra
            self.parent[rb] = ra


@dataclass(frozen=True)
class DefiniteInfo:
    """Completion of a reduced heap: closure, allocation, definite edges.

    ``closure`` contains every definite pure atom over the heap's variables
    (reflexive equalities included); ``points`` takes any target-tuple
    position as an edge.  When ``inconsistent``, all sets are saturated.
    """

    variables: tuple[Var, ...]
    inconsistent: bool
    closure: frozenset[PureAtom]
    alloc: frozenset[Var]
    points: frozenset[tuple[Var, Var]]

    def eq(self, x: Var, y: Var) -> bool:
        self._check(x, y)
        return self.inconsistent or pure_atom(x, True, y) in self.closure

    def neq(self, x: Var, y: Var) -> bool:
        self._check(x, y)
        return self.inconsistent or pure_atom(x, False, y) in self.closure

    def allocated(self, x: Var) -> bool:
        self._check(x)
        return x in self.alloc

    def reach(self) -> frozenset[tuple[Var, Var]]:
        """Transitive (non-reflexive) closure of the definite points-to edges.

        ``points`` is already lifted along definite equalities on both sides,
        so a plain reachability sweep over it suffices.
        """
        cached = self.__dict__.get("_reach")
        if cached is not None:
            return cached
        if self.inconsistent:
            result = frozenset((x, y) for x in self.variables for y in self.variables)
        else:
            succ: dict[Var, set[Var]] = {}
            for a, b in self.points:
                succ.setdefault(a, set()).add(b)
            closed: set[tuple[Var, Var]] = set()
            for start in list(succ):
                stack, seen = [start], set()
                while stack:
                    v = stack.pop()
                    for w in succ.get(v, ()):
                        if w not in seen:
                            seen.add(w)
                            stack.append(w)
                closed.update((start, w) for w in seen)
            result = frozenset(closed)
        object.__setattr__(self, "_reach", result)
        return result

    def _check(self, *vs: Var):
        varset = self.__dict__.get("_varset")
        if varset is None:
            varset = frozenset(self.variables)
            object.__setattr__(self, "_varset", varset)
        for v in vs:
            if v not in varset:
                raise UnknownVariableError(f"variable {v} not in heap")


@lru_cache(maxsize=1 << 16)
def complete(tau: SymbolicHeap) -> DefiniteInfo:
    """Completion of a reduced symbolic heap (all declared variables included).

    Results are cached; heaps are immutable and hashable, and the fixpoint
    engines re-complete the same shrunk heaps constantly.
    """
    if not tau.is_reduced:
        raise NotReducedError("complete() expects a reduced symbolic heap")
    variables = tuple(tau.vars_with_declared())
    uf = _UnionFind(variables)
    neq_seed: set[tuple[Var, Var]] = set()

    for atom in tau.pure:
        if atom.eq:
            uf.union(atom.lhs, atom.rhs)
        else:
            neq_seed.add((atom.lhs, atom.rhs))
    sources = [pt.source for pt in tau.spatial]
    for s in sources:
        neq_seed.add((NIL, s))
    for i, a in enumerate(sources):
        for b in sources[i + 1:]:
            neq_seed.add((a, b))

    # disequalities hold between whole equality classes
    neq_classes = {frozenset((uf.find(a), uf.find(b))) for a, b in neq_seed}
    inconsistent = any(len(pair) == 1 for pair in neq_classes)

    if inconsistent:
        closure = frozenset(pure_atom(a, e, b)
                            for i, a in enumerate(variables)
                            for b in variables[i:]
                            for e in (True, False))
        alloc = frozenset(variables)
        points = frozenset((a, b) for a in variables for b in variables)
        return DefiniteInfo(variables, True, closure, alloc, points)

    atoms = set()
    for i, a in enumerate(variables):
        for b in variables[i:]:
            if uf.find(a) == uf.find(b):
                atoms.add(pure_atom(a, True, b))
            elif frozenset((uf.find(a), uf.find(b))) in neq_classes:
                atoms.add(pure_atom(a, False, b))

    source_classes = {uf.find(s) for s in sources}
    alloc = frozenset(v for v in variables if uf.find(v) in source_classes)
    points = set()
    for pt in tau.spatial:
        for t in pt.targets:
            points.add((uf.find(pt.source), uf.find(t)))
    lifted = frozenset((a, b) for a in variables for b in variables
                       if (uf.find(a), uf.find(b)) in points)
    return DefiniteInfo(variables, False, frozenset(atoms), alloc, lifted)


def definitely_reaches(tau: SymbolicHeap, x: Var, y: Var) -> bool:
    """True iff y is reachable from x along definite points-to edges in every
    model (vacuously true for inconsistent heaps).  Reachability through
    unallocated aliases is deliberately not detected.
    """
    info = complete(tau)
    info._check(x, y)
    if info.inconsistent:
        return True
    return (x, y) in info.reach()
