"""Subgroup filter expressions over decoded trajectories.

Grammar (AND binds tighter than OR; parentheses group):

    query     := expr | <empty>           empty matches every subject
    expr      := term ("OR" term)*
    term      := atom ("AND" atom)*
    atom      := "(" expr ")" | predicate
    predicate := "visited-set" ("equals" | "contains") "{" ints "}"
               | "starts-in" "(" int ")"
               | "ends-in" "(" int ")"
               | "dwell-in-state" "(" int ")" cmp number ["years"]
    cmp       := ">" | ">=" | "<" | "<=" | "==" | "="

Example: ``starts-in(3) AND dwell-in-state(3) > 2 years``. Keywords are
case-insensitive. Parse failures carry the character offset so callers
can point at the offending token.
"""

from __future__ import annotations

import operator
import re
from dataclasses import dataclass
from typing import Mapping

from .errors import QueryParseError

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>\d+\.\d+|\d+)|(?P<ident>[A-Za-z][A-Za-z0-9-]*)"
    r"|(?P<op>>=|<=|==|[><={}(),]))"
)

_CMP_OPS = {
    ">": operator.gt,
    ">=": operator.ge,
    "<": operator.lt,
    "<=": operator.le,
    "==": operator.eq,
    "=": operator.eq,
}


@dataclass(frozen=True)
class SubjectFeatures:
    """Per-subject facts the predicates are evaluated against."""

    visited: frozenset[int]
    first_state: int
    last_state: int
    dwell: Mapping[int, float]


@dataclass(frozen=True)
class MatchAll:
    def matches(self, f: SubjectFeatures) -> bool:
        return True


@dataclass(frozen=True)
class VisitedSet:
    states: frozenset[int]
    exact: bool

    def matches(self, f: SubjectFeatures) -> bool:
        return f.visited == self.states if self.exact else self.states <= f.visited


@dataclass(frozen=True)
class StartsIn:
    state: int

    def matches(self, f: SubjectFeatures) -> bool:
        return f.first_state == self.state


@dataclass(frozen=True)
class EndsIn:
    state: int

    def matches(self, f: SubjectFeatures) -> bool:
        return f.last_state == self.state


@dataclass(frozen=True)
class DwellCmp:
    state: int
    op: str
    threshold: float

    def matches(self, f: SubjectFeatures) -> bool:
        return _CMP_OPS[self.op](f.dwell.get(self.state, 0.0), self.threshold)


@dataclass(frozen=True)
class And:
    left: object
    right: object

    def matches(self, f: SubjectFeatures) -> bool:
        return self.left.matches(f) and self.right.matches(f)


@dataclass(frozen=True)
class Or:
    left: object
    right: object

    def matches(self, f: SubjectFeatures) -> bool:
        return self.left.matches(f) or self.right.matches(f)


@dataclass(frozen=True)
class _Token:
    kind: str  # "number" | "ident" | "op" | "end"
    text: str
    position: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            bad_at = len(text) - len(stripped)
            raise QueryParseError(f"unexpected character {text[bad_at]!r}", bad_at)
        kind = m.lastgroup
        tokens.append(_Token(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def current(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message: str) -> None:
        raise QueryParseError(message, self.current.position)

    def expect_op(self, text: str) -> None:
        if self.current.kind != "op" or self.current.text != text:
            self.fail(f"expected {text!r}")
        self.advance()

    def keyword(self) -> str | None:
        return self.current.text.lower() if self.current.kind == "ident" else None

    def parse(self):
        if self.current.kind == "end":
            return MatchAll()
        node = self.expr()
        if self.current.kind != "end":
            self.fail(f"unexpected trailing input {self.current.text!r}")
        return node

    def expr(self):
        node = self.term()
        while self.keyword() == "or":
            self.advance()
            node = Or(node, self.term())
        return node

    def term(self):
        node = self.atom()
        while self.keyword() == "and":
            self.advance()
            node = And(node, self.atom())
        return node

    def atom(self):
        if self.current.kind == "op" and self.current.text == "(":
            self.advance()
            node = self.expr()
            self.expect_op(")")
            return node
        kw = self.keyword()
        if kw == "visited-set":
            self.advance()
            mode = self.keyword()
            if mode not in ("equals", "contains"):
                self.fail("expected 'equals' or 'contains' after 'visited-set'")
            self.advance()
            return VisitedSet(self.state_set(), exact=(mode == "equals"))
        if kw == "starts-in":
            self.advance()
            return StartsIn(self.parenthesized_state())
        if kw == "ends-in":
            self.advance()
            return EndsIn(self.parenthesized_state())
        if kw == "dwell-in-state":
            self.advance()
            state = self.parenthesized_state()
            if self.current.kind != "op" or self.current.text not in _CMP_OPS:
                self.fail("expected a comparison operator")
            op = self.advance().text
            if self.current.kind != "number":
                self.fail("expected a number")
            threshold = float(self.advance().text)
            if self.keyword() == "years":
                self.advance()
            return DwellCmp(state, op, threshold)
        self.fail("expected a predicate or '('")

    def state_set(self) -> frozenset[int]:
        self.expect_op("{")
        states = set()
        if self.current.kind == "op" and self.current.text == "}":
            self.advance()
            return frozenset()
        while True:
            states.add(self.state_index())
            if self.current.kind == "op" and self.current.text == ",":
                self.advance()
                continue
            self.expect_op("}")
            return frozenset(states)

    def parenthesized_state(self) -> int:
        self.expect_op("(")
        state = self.state_index()
        self.expect_op(")")
        return state

    def state_index(self) -> int:
        if self.current.kind != "number" or "." in self.current.text:
            self.fail("expected a state index")
        return int(self.advance().text)


def parse_query(text: str):
    """Parse a filter expression; empty or blank input matches all subjects."""
    return _Parser(text).parse()
