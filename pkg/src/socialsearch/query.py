"""S-expression boolean queries over the inverted index.

Grammar::

    expr := atom | '(' op expr+ ')'
    op   := 'and' | 'or'
    atom := prefix ':' value

Cost model: every term cursor is advanced through its whole posting list
(no skipping, no early termination), so ``postings_touched`` is the sum of
the leaf list lengths and ``terms_opened`` the number of leaves.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .index import PREFIXES, InvertedIndex, Term


class ParseError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnbalancedParenError(ParseError):
    pass


class EmptyOperatorError(ParseError):
    pass


class UnknownOperatorError(ParseError):
    pass


class UnknownPrefixError(ParseError):
    pass


class MissingColonError(ParseError):
    pass


@dataclass(frozen=True)
class TermNode:
    term: Term


@dataclass(frozen=True)
class And:
    children: tuple

    def __post_init__(self):
        if not self.children:
            raise ValueError("And needs at least one child")
        object.__setattr__(self, "children", tuple(self.children))


@dataclass(frozen=True)
class Or:
    children: tuple

    def __post_init__(self):
        if not self.children:
            raise ValueError("Or needs at least one child")
        object.__setattr__(self, "children", tuple(self.children))


SExpr = TermNode | And | Or


@dataclass(frozen=True)
class CostReport:
    postings_touched: int = 0
    terms_opened: int = 0

    def __add__(self, other: CostReport) -> CostReport:
        return CostReport(
            self.postings_touched + other.postings_touched,
            self.terms_opened + other.terms_opened,
        )


@dataclass(frozen=True)
class ExecutionResult:
    doc_ids: np.ndarray
    cost: CostReport


def term(s: str) -> TermNode:
    return TermNode(Term.parse(s))


# -- parsing ---------------------------------------------------------------


def _lex(q: str):
    i, n = 0, len(q)
    while i < n:
        c = q[i]
        if c.isspace():
            i += 1
        elif c in "()":
            yield c, i
            i += 1
        else:
            j = i
            while j < n and not q[j].isspace() and q[j] not in "()":
                j += 1
            yield q[i:j], i
            i = j


def parse(q: str) -> SExpr:
    """Parse a query string; errors carry the UTF-8 byte offset of the problem."""
    try:
        return _parse(q)
    except ParseError as err:
        raise type(err)(str(err).rsplit(" at offset", 1)[0], len(q[: err.offset].encode("utf-8"))) from None


def _parse(q: str) -> SExpr:
    toks = list(_lex(q))
    pos = 0

    def atom(tok: str, off: int) -> TermNode:
        prefix, sep, value = tok.partition(":")
        if not sep:
            raise MissingColonError(f"missing ':' in atom {tok!r}", off)
        if prefix not in PREFIXES:
            raise UnknownPrefixError(f"unknown prefix {prefix!r}", off)
        if not value:
            raise MissingColonError(f"empty value in atom {tok!r}", off + len(tok))
        return TermNode(Term(prefix, value))

    def expr() -> SExpr:
        nonlocal pos
        if pos >= len(toks):
            raise UnbalancedParenError("unexpected end of input", len(q))
        tok, off = toks[pos]
        pos += 1
        if tok == ")":
            raise UnbalancedParenError("unexpected ')'", off)
        if tok != "(":
            return atom(tok, off)
        if pos >= len(toks):
            raise UnbalancedParenError("unclosed '('", len(q))
        op, op_off = toks[pos]
        pos += 1
        if op not in ("and", "or"):
            raise UnknownOperatorError(f"unknown operator {op!r}", op_off)
        children = []
        while True:
            if pos >= len(toks):
                raise UnbalancedParenError("unclosed '('", len(q))
            if toks[pos][0] == ")":
                close_off = toks[pos][1]
                pos += 1
                break
            children.append(expr())
        if not children:
            raise EmptyOperatorError(f"empty ({op}) body", close_off)
        return And(tuple(children)) if op == "and" else Or(tuple(children))

    result = expr()
    if pos != len(toks):
        raise UnbalancedParenError("trailing input after expression", toks[pos][1])
    return result


def render(e: SExpr) -> str:
    """Canonical single-line rendering; ``parse(render(e)) == e``."""
    if isinstance(e, TermNode):
        return str(e.term)
    op = "and" if isinstance(e, And) else "or"
    return f"({op} " + " ".join(render(c) for c in e.children) + ")"


def pretty(e: SExpr, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(e, TermNode):
        return pad + str(e.term)
    op = "and" if isinstance(e, And) else "or"
    inner = "\n".join(pretty(c, indent + 1) for c in e.children)
    return f"{pad}({op}\n{inner}\n{pad})"


def leaves(e: SExpr):
    if isinstance(e, TermNode):
        yield e.term
    else:
        for c in e.children:
            yield from leaves(c)


# -- execution -------------------------------------------------------------


def _intersect(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.intersect1d(a, b, assume_unique=True)


def execute(idx: InvertedIndex, e: SExpr) -> ExecutionResult:
    """Evaluate ``e``: And intersects, Or unions; results are ascending doc ids."""
    if isinstance(e, TermNode):
        ids = idx.lookup(e.term)
        return ExecutionResult(ids, CostReport(len(ids), 1))
    parts = [execute(idx, c) for c in e.children]
    cost = reduce(lambda x, y: x + y, (p.cost for p in parts))
    if isinstance(e, And):
        # intersect smallest-first; the result set does not depend on order
        lists = sorted((p.doc_ids for p in parts), key=len)
        ids = reduce(_intersect, lists)
    else:
        lists = [p.doc_ids for p in parts]
        ids = lists[0] if len(lists) == 1 else np.unique(np.concatenate(lists))
    return ExecutionResult(ids, cost)


def cost_of(idx: InvertedIndex, e: SExpr) -> CostReport:
    """Same cost as ``execute`` reports, without materialising any result."""
    if isinstance(e, TermNode):
        return CostReport(idx.df(e.term), 1)
    return reduce(lambda x, y: x + y, (cost_of(idx, c) for c in e.children))
