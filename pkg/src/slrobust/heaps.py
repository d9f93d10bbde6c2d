"""Abstract syntax for symbolic heaps and systems of inductive definitions.

A symbolic heap is a formula  ex z1..zk . sigma : pi  where sigma is a
separating conjunction of points-to assertions and predicate calls, and pi
is a set of pure (dis)equalities.  Variables are encoded as plain ints:

* ``0``  is the distinguished free variable ``nil``,
* ``i > 0`` is the i-th free variable (``x1``, ``x2``, ...),
* ``-k`` (k > 0) is the k-th bound (existentially quantified) variable.

Heaps are immutable and hashable; reduced heaps (no predicate calls) have a
canonical form so unfolding languages can be compared as plain sets.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Optional, Sequence

NIL = 0

Var = int


def free_var(i: int) -> Var:
    if i < 1:
        raise ValueError(f"free variable index must be >= 1, got {i}")
    return i


def bound_var(k: int) -> Var:
    if k < 1:
        raise ValueError(f"bound variable index must be >= 1, got {k}")
    return -k


def is_free(v: Var) -> bool:
    return v > 0


def is_bound(v: Var) -> bool:
    return v < 0


def var_name(v: Var) -> str:
    if v == NIL:
        return "nil"
    if v > 0:
        return f"x{v}"
    return f"z{-v}"


def var_key(v: Var) -> tuple[int, int]:
    """Total order on variables: nil < free (by index) < bound (by index)."""
    if v == NIL:
        return (0, 0)
    if v > 0:
        return (1, v)
    return (2, -v)


class ArityError(ValueError):
    """Predicate call or replacement with the wrong number of arguments."""


class MalformedTreeError(ValueError):
    """Unfolding tree whose children do not match its node's calls."""


class OracleCapExceeded(RuntimeError):
    """Brute-force enumeration grew past the configured cap."""


EQ = "="
NEQ = "!="


@dataclass(frozen=True, order=True)
class PureAtom:
    """Equality or disequality between two variables, canonically oriented."""

    lhs: Var
    rhs: Var
    eq: bool

    def __post_init__(self):
        if var_key(self.lhs) > var_key(self.rhs):
            raise ValueError("PureAtom must be built via pure_atom() for canonical orientation")

    @property
    def rel(self) -> str:
        return EQ if self.eq else NEQ

    def key(self):
        return (var_key(self.lhs), var_key(self.rhs), not self.eq)

    def __str__(self):
        return f"{var_name(self.lhs)} {self.rel} {var_name(self.rhs)}"


def pure_atom(a: Var, rel: str | bool, b: Var) -> PureAtom:
    eq = rel if isinstance(rel, bool) else (rel == EQ)
    if var_key(a) > var_key(b):
        a, b = b, a
    return PureAtom(a, b, eq)


@dataclass(frozen=True)
class PointsTo:
    """Single points-to assertion  source -> (t1, ..., tn),  n >= 1."""

    source: Var
    targets: tuple[Var, ...]

    def __post_init__(self):
        if not self.targets:
            raise ValueError("points-to assertion needs at least one target")

    def key(self):
        return (var_key(self.source), len(self.targets), tuple(var_key(t) for t in self.targets))

    def __str__(self):
        return f"{var_name(self.source)} -> ({', '.join(var_name(t) for t in self.targets)})"


@dataclass(frozen=True)
class PredCall:
    predicate: str
    args: tuple[Var, ...]

    def key(self):
        return (self.predicate, tuple(var_key(a) for a in self.args))

    def __str__(self):
        return f"{self.predicate}({', '.join(var_name(a) for a in self.args)})"


@dataclass(frozen=True)
class SymbolicHeap:
    """Quantified spatial/pure formula with predicate calls.

    ``free_count`` is the number of proper free variables (nil not counted);
    ``bound_count`` the number of existentials.  ``emp`` is simply the
    absence of spatial atoms.
    """

    free_count: int
    bound_count: int
    spatial: tuple[PointsTo, ...]
    calls: tuple[PredCall, ...]
    pure: frozenset[PureAtom]

    def __post_init__(self):
        for v in self.all_vars():
            if v > self.free_count:
                raise ValueError(f"free index {v} exceeds free_count {self.free_count}")
            if v < -self.bound_count:
                raise ValueError(f"bound index {-v} exceeds bound_count {self.bound_count}")

    @property
    def is_reduced(self) -> bool:
        return not self.calls

    def free_vars(self) -> tuple[Var, ...]:
        return tuple(range(1, self.free_count + 1))

    def occurring_vars(self) -> Iterator[Var]:
        """All variable occurrences in syntactic order (with repetitions)."""
        for pt in self.spatial:
            yield pt.source
            yield from pt.targets
        for call in self.calls:
            yield from call.args
        for atom in sorted(self.pure, key=PureAtom.key):
            yield atom.lhs
            yield atom.rhs

    def all_vars(self) -> set[Var]:
        out = set()
        for pt in self.spatial:
            out.add(pt.source)
            out.update(pt.targets)
        for call in self.calls:
            out.update(call.args)
        for atom in self.pure:
            out.add(atom.lhs)
            out.add(atom.rhs)
        return out

    def vars_with_declared(self) -> list[Var]:
        """nil, declared free and declared bound variables, in var order."""
        return [NIL, *range(1, self.free_count + 1),
                *(-k for k in range(1, self.bound_count + 1))]

    def map_vars(self, f: Callable[[Var], Var], free_count: int, bound_count: int,
                 keep_calls: bool = True) -> "SymbolicHeap":
        spatial = tuple(PointsTo(f(pt.source), tuple(f(t) for t in pt.targets))
                        for pt in self.spatial)
        calls = tuple(PredCall(c.predicate, tuple(f(a) for a in c.args))
                      for c in self.calls) if keep_calls else ()
        pure = frozenset(pure_atom(f(a.lhs), a.eq, f(a.rhs)) for a in self.pure)
        return SymbolicHeap(free_count, bound_count, spatial, calls, pure)

    def with_extra_pure(self, atoms: Iterable[PureAtom]) -> "SymbolicHeap":
        return SymbolicHeap(self.free_count, self.bound_count, self.spatial,
                            self.calls, self.pure | frozenset(atoms))

    def sort_key(self):
        return (self.free_count, self.bound_count,
                tuple(pt.key() for pt in self.spatial),
                tuple(c.key() for c in self.calls),
                tuple(sorted(a.key() for a in self.pure)))

    def __str__(self):
        parts = []
        if self.bound_count:
            names = " ".join(var_name(-k) for k in range(1, self.bound_count + 1))
            parts.append(f"ex {names} . ")
        atoms = [str(pt) for pt in self.spatial] + [str(c) for c in self.calls]
        parts.append(" * ".join(atoms) if atoms else "emp")
        if self.pure:
            inner = ", ".join(str(a) for a in sorted(self.pure, key=PureAtom.key))
            parts.append(f" : {{{inner}}}")
        return "".join(parts)


def mk_heap(free_count: int, bound_count: int = 0,
            spatial: Sequence[PointsTo] = (), calls: Sequence[PredCall] = (),
            pure: Iterable[PureAtom] = ()) -> SymbolicHeap:
    return SymbolicHeap(free_count, bound_count, tuple(spatial), tuple(calls),
                        frozenset(pure))


def emp(free_count: int, pure: Iterable[PureAtom] = ()) -> SymbolicHeap:
    return mk_heap(free_count, pure=pure)


# ---------------------------------------------------------------------------
# Canonical form for heaps (meaningful for reduced ones)


_ENC_BOUND = 1 << 20  # bound variables order after all free ones


def _enc(v: Var) -> int:
    # monotone with var_key: nil < free (by index) < bound (by index)
    return v if v >= 0 else _ENC_BOUND - v


def _dec(e: int) -> Var:
    return e if e <= _ENC_BOUND else _ENC_BOUND - e


def _to_raw(sh: SymbolicHeap):
    """Encoded-int view: (spatial, calls, pure) with atoms as plain tuples."""
    spatial = [(_enc(pt.source), len(pt.targets)) + tuple(_enc(t) for t in pt.targets)
               for pt in sh.spatial]
    calls = [(c.predicate,) + tuple(_enc(a) for a in c.args) for c in sh.calls]
    pure = [(_enc(a.lhs), _enc(a.rhs), not a.eq) for a in sh.pure]
    return spatial, calls, pure


def _canon_raw(spatial, calls, pure):
    """Canonical key for encoded atom lists: iterated sort + renumbering of
    bound encodings by first occurrence; lexicographically least wins."""
    best = None
    seen = set()
    for _ in range(8):
        spatial.sort()
        pure.sort()
        mapping: dict[int, int] = {}

        def visit(e: int) -> int:
            if e <= _ENC_BOUND:
                return e
            m = mapping.get(e)
            if m is None:
                m = mapping[e] = _ENC_BOUND + len(mapping) + 1
            return m

        spatial = [tuple(visit(e) if i != 1 else e for i, e in enumerate(atom))
                   for atom in spatial]
        calls = [(c[0],) + tuple(visit(e) for e in c[1:]) for c in calls]
        renamed = []
        for a, b, r in pure:
            a2, b2 = visit(a), visit(b)
            renamed.append((a2, b2, r) if a2 <= b2 else (b2, a2, r))
        pure = renamed
        key = (tuple(spatial), tuple(calls), tuple(sorted(set(pure))))
        if best is None or key < best:
            best = key
        if key in seen:
            break
        seen.add(key)
    return best


def _from_raw(free_count: int, bound_count: int, key) -> SymbolicHeap:
    spatial_t, calls_t, pure_t = key
    new_spatial = tuple(PointsTo(_dec(a[0]), tuple(_dec(t) for t in a[2:]))
                        for a in spatial_t)
    new_calls = tuple(PredCall(c[0], tuple(_dec(e) for e in c[1:])) for c in calls_t)
    # orientation is preserved by _enc monotonicity, so construct directly
    new_pure = frozenset(PureAtom(_dec(a), _dec(b), not r) for a, b, r in pure_t)
    return SymbolicHeap(free_count, bound_count, new_spatial, new_calls, new_pure)


def canonical(sh: SymbolicHeap) -> SymbolicHeap:
    """Canonicalize: sort atoms, renumber bound variables by first occurrence.

    Quantifiers that bind no occurrence are kept (they matter for
    establishment-style properties: an unused existential is a dangling
    logical variable), numbered after all occurring ones.  Sorting and
    renumbering are iterated to a fixpoint (renumbering can change sort
    order); across the handful of passes this needs, the lexicographically
    least representation seen wins, so the result is deterministic.
    """
    spatial, calls, pure = _to_raw(sh)
    key = _canon_raw(spatial, calls, pure)
    return _from_raw(sh.free_count, sh.bound_count, key)


# ---------------------------------------------------------------------------
# Systems of inductive definitions


@dataclass(frozen=True)
class Sid:
    """Named inductive predicates; each predicate has an arity and rule bodies.

    Declaration and rule order are preserved (witness reproducibility);
    language equality is up to rule order.
    """

    preds: tuple[tuple[str, int, tuple[SymbolicHeap, ...]], ...]
    _index: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    def __post_init__(self):
        idx = {}
        for name, arity, rules in self.preds:
            if name in idx:
                raise ValueError(f"duplicate predicate {name}")
            idx[name] = (arity, rules)
        object.__setattr__(self, "_index", idx)

    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _, _ in self.preds)

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def arity(self, name: str) -> int:
        return self._index[name][0]

    def rules(self, name: str) -> tuple[SymbolicHeap, ...]:
        return self._index[name][1]

    def max_arity(self) -> int:
        return max((arity for _, arity, _ in self.preds), default=0)

    def extended(self, name: str, arity: int, rules: Sequence[SymbolicHeap]) -> "Sid":
        return Sid(self.preds + ((name, arity, tuple(rules)),))

    def __str__(self):
        lines = []
        for name, arity, rules in self.preds:
            params = ", ".join(var_name(i) for i in range(1, arity + 1))
            body = " | ".join(str(r) for r in rules)
            lines.append(f"{name}({params}) <= {body} ;")
        return "\n".join(lines)


def mk_sid(*preds: tuple[str, int, Sequence[SymbolicHeap]]) -> Sid:
    return Sid(tuple((name, arity, tuple(rules)) for name, arity, rules in preds))


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    predicate: str
    rule_index: Optional[int]
    message: str

    def __str__(self):
        where = self.predicate if self.rule_index is None else f"{self.predicate}#{self.rule_index}"
        return f"[{self.kind}] {where}: {self.message}"


def validate_sid(sid: Sid) -> list[Diagnostic]:
    """Well-formedness diagnostics; empty list iff the SID is valid."""
    out = []
    for name, arity, rules in sid.preds:
        for i, body in enumerate(rules):
            if body.free_count != arity:
                out.append(Diagnostic("FreeCountMismatch", name, i,
                                      f"rule has {body.free_count} free variables, arity is {arity}"))
            for call in body.calls:
                if call.predicate not in sid:
                    out.append(Diagnostic("UnknownPredicate", name, i,
                                          f"call to undeclared predicate {call.predicate}"))
                elif len(call.args) != sid.arity(call.predicate):
                    out.append(Diagnostic("ArityMismatch", name, i,
                                          f"{call.predicate} called with {len(call.args)} args, "
                                          f"declared arity {sid.arity(call.predicate)}"))
            for v in body.all_vars():
                if v > body.free_count or v < -body.bound_count:
                    out.append(Diagnostic("DanglingVariable", name, i,
                                          f"variable {var_name(v)} not declared"))
                    break
    return out


# ---------------------------------------------------------------------------
# Predicate replacement, unfolding trees, unfoldings


def replace_call(host: SymbolicHeap, call_index: int, body: SymbolicHeap) -> SymbolicHeap:
    """Replace the call at ``call_index`` by ``body``.

    The body's free variables become the call's arguments; its bound
    variables are shifted past the host's (fresh by construction, no global
    counter needed).  The body may itself contain calls; they are spliced in
    at the replaced position.
    """
    if not 0 <= call_index < len(host.calls):
        raise IndexError(f"call index {call_index} out of range")
    call = host.calls[call_index]
    if body.free_count != len(call.args):
        raise ArityError(f"body has {body.free_count} free variables, "
                         f"call {call} expects {len(call.args)}")
    args = call.args
    shift = host.bound_count

    def remap(v: Var) -> Var:
        if v == NIL:
            return NIL
        if v > 0:
            return args[v - 1]
        return v - shift

    moved = body.map_vars(remap, host.free_count, host.bound_count + body.bound_count)
    calls = host.calls[:call_index] + moved.calls + host.calls[call_index + 1:]
    return SymbolicHeap(host.free_count, host.bound_count + body.bound_count,
                        host.spatial + moved.spatial, calls, host.pure | moved.pure)


@dataclass(frozen=True)
class UnfoldingTree:
    """Derivation tree: one child per predicate call of the node's body.

    ``origin`` records ``(predicate, rule_index)`` for nodes produced from a
    SID rule; the root of a wrapped query formula has ``origin = None``.
    """

    body: SymbolicHeap
    children: tuple["UnfoldingTree", ...]
    origin: Optional[tuple[str, int]] = None

    def __post_init__(self):
        if len(self.children) != len(self.body.calls):
            raise MalformedTreeError(
                f"node with {len(self.body.calls)} calls has {len(self.children)} children")

    def height(self) -> int:
        return 1 + max((c.height() for c in self.children), default=0)

    def render(self, indent: int = 0) -> str:
        tag = "" if self.origin is None else f"{self.origin[0]}#{self.origin[1]}: "
        lines = [" " * indent + tag + str(self.body)]
        for c in self.children:
            lines.append(c.render(indent + 2))
        return "\n".join(lines)


def leaf(body: SymbolicHeap, origin=None) -> UnfoldingTree:
    return UnfoldingTree(body, (), origin)


def unfold(tree: UnfoldingTree) -> SymbolicHeap:
    """Flatten a tree into its (canonicalized) reduced symbolic heap."""
    return canonical(_unfold_raw(tree))


def _unfold_raw(tree: UnfoldingTree) -> SymbolicHeap:
    result = tree.body
    for i in reversed(range(len(tree.children))):
        child = _unfold_raw(tree.children[i])
        if not child.is_reduced:
            raise MalformedTreeError("child unfolding is not reduced")
        result = replace_call(result, i, child)
    return result


def check_tree(tree: UnfoldingTree, sid: Sid) -> None:
    """Verify that each child derives from a rule of the matching predicate."""
    for i, child in enumerate(tree.children):
        call = tree.body.calls[i]
        if child.origin is None:
            raise MalformedTreeError("internal node lacks a rule origin")
        pred, rule_idx = child.origin
        if pred != call.predicate or not 0 <= rule_idx < len(sid.rules(pred)):
            raise MalformedTreeError(f"child {i} does not match call {call}")
        if child.body != sid.rules(pred)[rule_idx]:
            raise MalformedTreeError(f"child {i} body is not rule {pred}#{rule_idx}")
        check_tree(child, sid)


def enumerate_unfoldings(sid: Sid, start: SymbolicHeap, max_height: int,
                         cap: int = 100_000) -> list[SymbolicHeap]:
    """All canonical unfoldings of ``start`` with derivation height <= max_height.

    The height counts predicate expansions: a call replaced by a call-free
    rule body contributes height 1; the ``start`` wrapper itself is free.
    Deterministic order.  Raises :class:`OracleCapExceeded` past ``cap``
    composition steps -- this is a test oracle, not a decision procedure.
    All work happens on encoded integer tuples; heaps are only materialized
    for the deduplicated results.
    """
    budget = [cap]
    # per (pred, height): set of reduced raw unfoldings (bound_count, key)
    table: dict[tuple[str, int], list] = {}
    raw_bodies = {}

    def body_raw(body: SymbolicHeap):
        if id(body) not in raw_bodies:
            spatial, calls, pure = _to_raw(body)
            raw_bodies[id(body)] = (spatial, calls, pure, body.bound_count)
        return raw_bodies[id(body)]

    def compose(body: SymbolicHeap, children):
        """Replace the body's calls by reduced raw unfoldings; canonical key."""
        budget[0] -= 1
        if budget[0] < 0:
            raise OracleCapExceeded(f"more than {cap} compositions")
        spatial0, calls0, pure0, bound = body_raw(body)
        spatial = list(spatial0)
        pure = list(pure0)
        for (cbound, ckey), call in zip(children, calls0):
            cspatial, _, cpure = ckey
            args = call[1:]

            def remap(e, _args=args, _shift=bound):
                if e == 0:
                    return 0
                if e <= _ENC_BOUND:
                    return _args[e - 1]
                return e + _shift

            for atom in cspatial:
                spatial.append((remap(atom[0]), atom[1])
                               + tuple(remap(t) for t in atom[2:]))
            for a, b, r in cpure:
                a2, b2 = remap(a), remap(b)
                pure.append((a2, b2, r) if a2 <= b2 else (b2, a2, r))
            bound += cbound
        return bound, _canon_raw(spatial, [], pure)

    def pred_unfoldings(name: str, h: int) -> list:
        if h <= 0:
            return []
        memo_key = (name, h)
        if memo_key in table:
            return table[memo_key]
        acc = set()
        for body in sid.rules(name):
            pools = [pred_unfoldings(c.predicate, h - 1) for c in body.calls]
            for choice in itertools.product(*pools):
                acc.add(compose(body, choice))
        result = sorted(acc)
        table[memo_key] = result
        return result

    out = set()
    pools = [pred_unfoldings(c.predicate, max_height) for c in start.calls]
    for choice in itertools.product(*pools):
        out.add(compose(start, choice))
    heaps = [_from_raw(start.free_count, bound, key) for bound, key in sorted(out)]
    return sorted(heaps, key=SymbolicHeap.sort_key)


def nonempty_predicates(sid: Sid) -> frozenset[str]:
    """Predicates with at least one unfolding (backward reachability fixpoint)."""
    alive: set[str] = set()
    changed = True
    while changed:
        changed = False
        for name, _, rules in sid.preds:
            if name in alive:
                continue
            for body in rules:
                if all(c.predicate in alive for c in body.calls):
                    alive.add(name)
                    changed = True
                    break
    return frozenset(alive)
