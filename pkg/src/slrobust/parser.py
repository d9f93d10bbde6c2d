"""Text format for systems of inductive definitions (``.hrs`` files).

Grammar::

    doc    := decl+
    decl   := ["@final"] NAME "(" params? ")" "<=" body ("|" body)* ";"
    body   := ("ex" ids ".")? atom ("*" atom)* (":" "{" pure ("," pure)* "}")?
    atom   := "emp" | term "->" "(" term ("," term)* ")" | NAME "(" term ("," term)* ")"
    pure   := term ("=" | "!=") term
    term   := IDENT | "nil"

Line comments start with ``#``.  Identifiers listed after ``ex`` are bound;
all others must be parameters of the declaration or ``nil``.  A predicate
named ``query`` plays the role of the optional query block: its (single)
rule body is the formula a command line run analyzes.  ``@final`` marks a
class predicate as accepting when the file is used as an equivalence-class
specification.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .heaps import (NIL, PointsTo, PredCall, PureAtom, Sid, SymbolicHeap,
                    pure_atom, var_name)

QUERY_PRED = "query"

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<arrow>->)
  | (?P<defs><=)
  | (?P<neq>!=)
  | (?P<sym>[(),.;:|={}*])
  | (?P<final>@final)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
""", re.VERBOSE)


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos, line, col = 0, 1, 1
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        lexeme = m.group()
        if kind != "ws":
            tokens.append(_Token("sym" if kind in ("arrow", "defs", "neq") else kind,
                                 lexeme, line, col))
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            col = len(lexeme) - lexeme.rfind("\n")
        else:
            col += len(lexeme)
        pos = m.end()
    tokens.append(_Token("eof", "", line, col))
    return tokens


@dataclass(frozen=True)
class SidDocument:
    """Parsed SID plus the optional ``query`` formula and ``@final`` markers."""

    sid: Sid
    query: Optional[SymbolicHeap]
    finals: frozenset[str]


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.next()
        if tok.text != text:
            raise ParseError(f"expected {text!r}, found {tok.text or 'end of input'!r}",
                             tok.line, tok.col)
        return tok

    def expect_ident(self) -> _Token:
        tok = self.next()
        if tok.kind != "ident":
            raise ParseError(f"expected identifier, found {tok.text or 'end of input'!r}",
                             tok.line, tok.col)
        return tok

    # declarations -----------------------------------------------------

    def document(self) -> SidDocument:
        decls = []
        finals = set()
        while self.peek().kind != "eof":
            final = False
            if self.peek().kind == "final":
                self.next()
                final = True
            decls.append(self.decl())
            if final:
                finals.add(decls[-1][0])
        if not decls:
            tok = self.peek()
            raise ParseError("empty document", tok.line, tok.col)
        arities = {name: len(params) for name, params, _ in decls}
        preds = []
        query = None
        for name, params, raw_bodies in decls:
            rules = tuple(self.elaborate(body, params, arities) for body in raw_bodies)
            if name == QUERY_PRED:
                if len(rules) != 1:
                    tok = self.peek()
                    raise ParseError("query must have exactly one body", tok.line, tok.col)
                query = rules[0]
            preds.append((name, len(params), rules))
        doc_sid = Sid(tuple((n, a, r) for n, a, r in preds if n != QUERY_PRED))
        return SidDocument(doc_sid, query, frozenset(finals))

    def decl(self):
        name_tok = self.expect_ident()
        if name_tok.text in ("nil", "ex", "emp"):
            raise ParseError(f"{name_tok.text!r} is reserved", name_tok.line, name_tok.col)
        self.expect("(")
        params = []
        if self.peek().text != ")":
            params.append(self.expect_ident().text)
            while self.peek().text == ",":
                self.next()
                params.append(self.expect_ident().text)
        self.expect(")")
        if len(set(params)) != len(params) or "nil" in params:
            raise ParseError("parameters must be distinct identifiers other than nil",
                             name_tok.line, name_tok.col)
        self.expect("<=")
        bodies = [self.raw_body()]
        while self.peek().text == "|":
            self.next()
            bodies.append(self.raw_body())
        self.expect(";")
        return name_tok.text, params, bodies

    # bodies are first scanned into a token-level structure, then names are
    # resolved against the parameter list once all declarations are known

    def raw_body(self):
        bound = []
        if self.peek().text == "ex":
            self.next()
            while self.peek().text != ".":
                bound.append(self.expect_ident())
            self.expect(".")
        atoms = [self.atom()]
        while self.peek().text == "*":
            self.next()
            atoms.append(self.atom())
        pure = []
        if self.peek().text == ":":
            self.next()
            self.expect("{")
            pure.append(self.pure_formula())
            while self.peek().text == ",":
                self.next()
                pure.append(self.pure_formula())
            self.expect("}")
        return bound, atoms, pure

    def atom(self):
        tok = self.next()
        if tok.kind != "ident":
            raise ParseError(f"expected an atom, found {tok.text!r}", tok.line, tok.col)
        if tok.text == "emp":
            return ("emp", tok)
        if self.peek().text == "->":
            self.next()
            self.expect("(")
            targets = [self.term()]
            while self.peek().text == ",":
                self.next()
                targets.append(self.term())
            self.expect(")")
            return ("pts", tok, targets)
        if self.peek().text == "(":
            self.next()
            args = []
            if self.peek().text != ")":
                args.append(self.term())
                while self.peek().text == ",":
                    self.next()
                    args.append(self.term())
            self.expect(")")
            return ("call", tok, args)
        raise ParseError(f"expected '->' or '(' after {tok.text!r}", tok.line, tok.col)

    def term(self) -> _Token:
        return self.expect_ident()

    def pure_formula(self):
        lhs = self.term()
        op = self.next()
        if op.text not in ("=", "!="):
            raise ParseError(f"expected '=' or '!=', found {op.text!r}", op.line, op.col)
        rhs = self.term()
        return lhs, op.text, rhs

    # name resolution ----------------------------------------------------

    def elaborate(self, raw, params: list[str], arities: dict[str, int]) -> SymbolicHeap:
        bound_toks, atoms, pure_toks = raw
        env = {"nil": NIL}
        for i, p in enumerate(params, start=1):
            env[p] = i
        for k, tok in enumerate(bound_toks, start=1):
            if tok.text in env:
                raise ParseError(f"{tok.text!r} shadows a parameter or nil", tok.line, tok.col)
            env[tok.text] = -k

        def resolve(tok: _Token) -> int:
            if tok.text not in env:
                raise ParseError(f"unknown identifier {tok.text!r} (not a parameter, "
                                 f"bound variable or nil)", tok.line, tok.col)
            return env[tok.text]

        spatial, calls = [], []
        for a in atoms:
            if a[0] == "emp":
                continue
            if a[0] == "pts":
                _, src, targets = a
                spatial.append(PointsTo(resolve(src), tuple(resolve(t) for t in targets)))
            else:
                _, name, args = a
                if name.text not in arities:
                    raise ParseError(f"call to undeclared predicate {name.text!r}",
                                     name.line, name.col)
                if len(args) != arities[name.text]:
                    raise ParseError(
                        f"{name.text} called with {len(args)} arguments, declared with "
                        f"{arities[name.text]}", name.line, name.col)
                calls.append(PredCall(name.text, tuple(resolve(t) for t in args)))
        pure = frozenset(pure_atom(resolve(l), op == "=", resolve(r))
                         for l, op, r in pure_toks)
        return SymbolicHeap(len(params), len(bound_toks), tuple(spatial), tuple(calls), pure)


def parse(text: str) -> SidDocument:
    return _Parser(text).document()


def parse_body(text: str, params: int | list[str], sid: Optional[Sid] = None) -> SymbolicHeap:
    """Parse a single body against given parameter names (test/CLI helper)."""
    if isinstance(params, int):
        params = [var_name(i) for i in range(1, params + 1)]
    arities = {name: sid.arity(name) for name in sid.names()} if sid else {}
    parser = _Parser(text + "\n;")  # sentinel so raw_body stops cleanly
    raw = parser.raw_body()
    parser.expect(";")
    # unknown predicates surface as UnknownPredicate when arity info is absent
    for a in raw[1]:
        if a[0] == "call" and a[1].text not in arities:
            arities[a[1].text] = len(a[2])
    return parser.elaborate(raw, list(params), arities)


def print_sid(sid: Sid, finals: frozenset[str] = frozenset(),
              query: Optional[SymbolicHeap] = None) -> str:
    """Render a SID in the concrete syntax (generated x1../z1.. names)."""
    lines = []
    for name, arity, rules in sid.preds:
        prefix = "@final " if name in finals else ""
        params = ", ".join(var_name(i) for i in range(1, arity + 1))
        if len(rules) == 1:
            lines.append(f"{prefix}{name}({params}) <= {rules[0]} ;")
        else:
            body = "\n  | ".join(str(r) for r in rules)
            lines.append(f"{prefix}{name}({params}) <=\n    {body} ;")
    if query is not None:
        params = ", ".join(var_name(i) for i in range(1, query.free_count + 1))
        lines.append(f"{QUERY_PRED}({params}) <= {query} ;")
    return "\n".join(lines) + "\n"
