"""Text syntax for queries, selection predicates and datalog programs.

Query grammar (all binary operators share one precedence level and associate
to the left; use parentheses to group)::

    query   := unary (BINOP unary)*            BINOP: uplus minus minint maxun x join
    unary   := primary ["as" NAME]
    primary := "(" query ")" | NAME
             | "empty" [NAME]
             | "one" NAME "(" [lit ("," lit)*] ")"
             | "rename" "(" query "," NAME "->" NAME ")"
             | "dedup" "(" query ")"
             | "select" "(" query "," pred ")"
             | "project" "(" query ("," NAME)* ")"
             | "agg" "(" query "," ["group" NAME ("," NAME)* ","] AGG "(" NAME ")" ")"

Predicate grammar::

    pred := conj ("or" conj)*        conj := neg ("and" neg)*
    neg  := "not" neg | "(" pred ")" | "true" | "false" | atom
    atom := attr ("=" | "!=" | "<" | "<=" | ">" | ">=") (attr | lit)
          | attr "in" ("{" lit ("," lit)* "}" | ("[" | "(") bound "," bound ("]" | ")"))
    attr := NAME | "#" INT

Datalog: ``Head(X, Y) :- Body1(X, Z), Body2(Z, Y).`` one rule per line,
``#output Head`` selects the answer relation, ``%`` starts a comment.
Identifiers starting with an upper-case letter or ``_`` are variables.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Any

from .errors import ParseError
from .sets import (
    And,
    Const,
    Equals,
    FactSetExpr,
    InSet,
    Interval,
    Not,
    Or,
    PairEquals,
    PairLess,
    Pred,
)

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+|\n)
  | (?P<comment>%[^\n]*)
  | (?P<num>[-+]?inf\b|[-+]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)
  | (?P<str>"(?:[^"\\\n]|\\.)*"|'(?:[^'\\\n]|\\.)*')
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>->|:-|<=|>=|!=|[()\[\]{},.<>=\#;:*])
    """,
    re.VERBOSE,
)

BINOPS = ("uplus", "minus", "minint", "maxun", "x", "join")
QUERY_KEYWORDS = set(BINOPS) | {"empty", "one", "rename", "dedup", "select", "project", "agg", "as", "group"}


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int
    value: Any = None


def tokenize(text: str) -> list[Token]:
    out: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", text, line, pos - line_start + 1)
        kind = m.lastgroup
        tok = m.group()
        col = pos - line_start + 1
        if kind == "ws":
            if tok == "\n":
                line += 1
                line_start = m.end()
        elif kind != "comment":
            value = None
            if kind == "num":
                if tok.lstrip("+-") == "inf":
                    value = -math.inf if tok.startswith("-") else math.inf
                elif re.fullmatch(r"[-+]?\d+", tok):
                    value = int(tok)
                else:
                    value = float(tok)
            elif kind == "str":
                value = bytes(tok[1:-1], "utf-8").decode("unicode_escape") if "\\" in tok else tok[1:-1]
            out.append(Token(kind, tok, line, col, value))
        pos = m.end()
    out.append(Token("eof", "", line, pos - line_start + 1))
    return out


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Token | None = None):
        tok = tok or self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        return ParseError(f"{msg}, found {found}", self.text, tok.line, tok.col)

    def at(self, text: str) -> bool:
        return self.tok.kind in ("punct", "name") and self.tok.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.error(f"expected {text!r}")
        t = self.tok
        self.i += 1
        return t

    def name(self, what: str = "a name") -> str:
        if self.tok.kind != "name":
            raise self.error(f"expected {what}")
        t = self.tok
        self.i += 1
        return t.text

    def literal(self):
        t = self.tok
        if t.kind in ("num", "str"):
            self.i += 1
            return t.value
        raise self.error("expected a number or a quoted string")

    def end(self):
        if self.tok.kind != "eof":
            raise self.error("unexpected trailing input")

    # -- queries -----------------------------------------------------------

    def query(self):
        from . import algebra as A

        q = self.unary()
        ctors = {
            "uplus": A.AdditiveUnion,
            "minus": A.Difference,
            "minint": A.MinIntersect,
            "maxun": A.MaxUnion,
            "x": A.CrossProduct,
            "join": A.NaturalJoin,
        }
        while self.tok.kind == "name" and self.tok.text in ctors:
            op = self.tok.text
            self.i += 1
            q = ctors[op](q, self.unary())
        return q

    def unary(self):
        from .algebra import As

        q = self.primary()
        while self.accept("as"):
            q = As(q, self.name("a relation name"))
        return q

    def primary(self):
        from . import algebra as A
        from .aggregates import Aggregate

        t = self.tok
        if self.accept("("):
            q = self.query()
            self.expect(")")
            return q
        if t.kind != "name":
            raise self.error("expected a query")
        kw = t.text
        if kw == "empty":
            self.i += 1
            if self.tok.kind == "name" and self.tok.text not in QUERY_KEYWORDS:
                return A.EmptyConst(self.name())
            return A.EmptyConst()
        if kw == "one":
            self.i += 1
            rel = self.name("a relation name")
            self.expect("(")
            vals = []
            if not self.at(")"):
                vals.append(self.literal())
                while self.accept(","):
                    vals.append(self.literal())
            self.expect(")")
            return A.SingletonConst(rel, tuple(vals))
        if kw in ("rename", "dedup", "select", "project", "agg"):
            self.i += 1
            self.expect("(")
            child = self.query()
            if kw == "dedup":
                q = A.Dedup(child)
            elif kw == "rename":
                self.expect(",")
                old = self.name("an attribute name")
                self.expect("->")
                q = A.Rename(child, old, self.name("an attribute name"))
            elif kw == "select":
                self.expect(",")
                q = A.Select(child, self.pred())
            elif kw == "project":
                attrs = []
                while self.accept(","):
                    attrs.append(self.name("an attribute name"))
                q = A.Project(child, tuple(attrs))
            else:
                self.expect(",")
                group = None
                if self.accept("group"):
                    group = []
                    while self.tok.kind == "name" and not self.peek().text == "(":
                        group.append(self.name())
                        self.expect(",")
                agg = self.name("an aggregator")
                self.expect("(")
                attr = self.name("an attribute name")
                self.expect(")")
                q = Aggregate(child, agg, attr, None if group is None else tuple(group))
            self.expect(")")
            return q
        if kw in QUERY_KEYWORDS:
            raise self.error("expected a query")
        self.i += 1
        return A.Extract(kw)

    # -- predicates --------------------------------------------------------

    def pred(self) -> Pred:
        args = [self.conj()]
        while self.accept("or"):
            args.append(self.conj())
        return args[0] if len(args) == 1 else Or(tuple(args))

    def conj(self) -> Pred:
        args = [self.neg()]
        while self.accept("and"):
            args.append(self.neg())
        return args[0] if len(args) == 1 else And(tuple(args))

    def neg(self) -> Pred:
        if self.accept("not"):
            return Not(self.neg())
        if self.accept("("):
            p = self.pred()
            self.expect(")")
            return p
        if self.accept("true"):
            return Const(True)
        if self.accept("false"):
            return Const(False)
        return self.atom()

    def attr(self):
        if self.accept("#"):
            t = self.tok
            if t.kind != "num" or not isinstance(t.value, int):
                raise self.error("expected an attribute position")
            self.i += 1
            return t.value
        return self.name("an attribute")

    def _is_attr(self) -> bool:
        return self.at("#") or (self.tok.kind == "name" and self.tok.text not in ("not", "and", "or", "in"))

    def atom(self) -> Pred:
        a = self.attr()
        t = self.tok
        if self.accept("in"):
            if self.accept("{"):
                vals = [self.literal()]
                while self.accept(","):
                    vals.append(self.literal())
                self.expect("}")
                return InSet(a, frozenset(vals))
            if self.at("[") or self.at("("):
                lo_closed = self.tok.text == "["
                self.i += 1
                lo = self.literal()
                self.expect(",")
                hi = self.literal()
                if not (self.at("]") or self.at(")")):
                    raise self.error("expected ']' or ')'")
                hi_closed = self.tok.text == "]"
                self.i += 1
                lo = None if lo == -math.inf else lo
                hi = None if hi == math.inf else hi
                return Interval(a, lo, hi, lo_closed, hi_closed)
            raise self.error("expected '{' or an interval")
        for op in ("=", "!=", "<", "<=", ">", ">="):
            if self.accept(op):
                break
        else:
            raise self.error("expected a comparison", t)
        if self._is_attr():
            b = self.attr()
            return {
                "=": lambda: PairEquals(a, b),
                "!=": lambda: Not(PairEquals(a, b)),
                "<": lambda: PairLess(a, b),
                ">": lambda: PairLess(b, a),
                "<=": lambda: Or((PairLess(a, b), PairEquals(a, b))),
                ">=": lambda: Or((PairLess(b, a), PairEquals(a, b))),
            }[op]()
        v = self.literal()
        return {
            "=": lambda: Equals(a, v),
            "!=": lambda: Not(Equals(a, v)),
            "<": lambda: Interval(a, None, v, True, False),
            "<=": lambda: Interval(a, None, v, True, True),
            ">": lambda: Interval(a, v, None, False, True),
            ">=": lambda: Interval(a, v, None, True, True),
        }[op]()

    # -- datalog -----------------------------------------------------------

    def program(self, output: str | None):
        from .datalog import Program, Rule

        rules = []
        self._anon = 0
        while self.tok.kind != "eof":
            if self.accept("#"):
                kw = self.name("a directive")
                if kw != "output":
                    raise self.error("unknown directive", self.toks[self.i - 1])
                out = self.name("a relation name")
                output = output or out
                self.accept(".")
                continue
            head = self.dl_atom()
            body = []
            if self.accept(":-"):
                body.append(self.dl_atom())
                while self.accept(","):
                    body.append(self.dl_atom())
            self.expect(".")
            rules.append(Rule(head, tuple(body)))
        if output is None:
            if not rules:
                raise self.error("empty program needs an #output directive")
            output = rules[-1].head.relation
        return Program(tuple(rules), output)

    def dl_atom(self):
        from .datalog import Atom

        rel = self.name("a relation name")
        self.expect("(")
        terms = []
        if not self.at(")"):
            terms.append(self.dl_term())
            while self.accept(","):
                terms.append(self.dl_term())
        self.expect(")")
        return Atom(rel, tuple(terms))

    def dl_term(self):
        from .datalog import Var

        t = self.tok
        if t.kind == "name":
            self.i += 1
            if t.text == "_":
                self._anon += 1
                return Var(f"_anon{self._anon}")
            if t.text[0].isupper() or t.text[0] == "_":
                return Var(t.text)
            return t.text
        return self.literal()


def parse_query(text: str):
    p = _Parser(text)
    q = p.query()
    p.end()
    return q


def parse_pred(text: str) -> Pred:
    p = _Parser(text)
    pred = p.pred()
    p.end()
    return pred


def parse_set(text: str) -> FactSetExpr:
    """``R: pred; S: pred`` (``*`` for every other relation)."""
    p = _Parser(text)
    parts, default = {}, None
    while p.tok.kind != "eof":
        if p.accept("*"):
            rel = None
        else:
            rel = p.name("a relation name")
        p.expect(":")
        pred = p.pred()
        if rel is None:
            default = pred
        else:
            parts[rel] = pred
        if not p.accept(";"):
            break
    p.end()
    return FactSetExpr(parts, default)


def parse_datalog(text: str, output: str | None = None):
    p = _Parser(text)
    return p.program(output)


def looks_like_datalog(text: str) -> bool:
    return ":-" in text or "#output" in text


def _fmt_lit(v) -> str:
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    return repr(v)


def _fmt_attr(a) -> str:
    return f"#{a}" if isinstance(a, int) else a


def format_pred(p: Pred) -> str:
    if isinstance(p, Const):
        return "true" if p.value else "false"
    if isinstance(p, And):
        return "(" + " and ".join(format_pred(a) for a in p.args) + ")" if p.args else "true"
    if isinstance(p, Or):
        return "(" + " or ".join(format_pred(a) for a in p.args) + ")" if p.args else "false"
    if isinstance(p, Not):
        return f"not {format_pred(p.arg)}"
    if isinstance(p, Interval):
        lo = "-inf" if p.lo is None else _fmt_lit(p.lo)
        hi = "inf" if p.hi is None else _fmt_lit(p.hi)
        return f"{_fmt_attr(p.attr)} in {'[' if p.lo_closed else '('}{lo}, {hi}{']' if p.hi_closed else ')'}"
    if isinstance(p, Equals):
        return f"{_fmt_attr(p.attr)} = {_fmt_lit(p.value)}"
    if isinstance(p, InSet):
        vals = sorted(p.values, key=lambda v: (isinstance(v, str), v))
        if not vals:
            return "false"
        return f"{_fmt_attr(p.attr)} in {{{', '.join(_fmt_lit(v) for v in vals)}}}"
    if isinstance(p, PairEquals):
        return f"{_fmt_attr(p.left)} = {_fmt_attr(p.right)}"
    if isinstance(p, PairLess):
        return f"{_fmt_attr(p.left)} < {_fmt_attr(p.right)}"
    raise TypeError(f"not a predicate: {p!r}")
