"""Surface syntax for core programs, the inputs document and result JSON.

Grammar (s-expressions, ``;`` starts a line comment)::

    e ::= number | ident
        | (+ e e) | (scalel e e) | (scaler e e)
        | (if0 e e e) | (pair e e) | (proj 1 e) | (proj 2 e)
        | (lam ident e) | (app e e)
        | (ref e) | (read e) | (write e e)
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from typing import Iterator

from .core import (
    App, BinOp, Expr, If0, Lam, Metric, Op, Pair, Proj, Read,
    Real, Ref, TaggedReal, Var, Write, fmt_num,
)
from .errors import InputError, ParseError, UnknownMetric
from .evaluator import EvalResult

_NUMBER = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?\Z")
_TOKEN = re.compile(r"\s+|;[^\n]*|(?P<paren>[()])|(?P<atom>[^\s();]+)")

KEYWORDS = {
    "+": 2, "scalel": 2, "scaler": 2, "if0": 3, "pair": 2, "proj": 2,
    "lam": 2, "app": 2, "ref": 1, "read": 1, "write": 2,
}
_BINOPS = {"+": Op.PLUS, "scalel": Op.TIMES_L, "scaler": Op.TIMES_R}
_EXPR_START = frozenset({"(", "number", "identifier"})


@dataclass(frozen=True)
class SourceSpan:
    start: int
    end: int

    def __iter__(self):
        yield self.start
        yield self.end


@dataclass(frozen=True)
class Token:
    text: str
    span: SourceSpan


def tokenize(text: str) -> Iterator[Token]:
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        # every character is either whitespace, a paren, ';' or an atom char
        assert m is not None
        if m.group("paren") or m.group("atom"):
            yield Token(m.group(0), SourceSpan(m.start(), m.end()))
        pos = m.end()


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = list(tokenize(text))
        self.i = 0

    def eof_span(self) -> SourceSpan:
        return SourceSpan(len(self.text), len(self.text))

    def peek(self) -> Token | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self, expected) -> Token:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of input", self.eof_span(), expected)
        self.i += 1
        return tok

    def expect_close(self) -> None:
        tok = self.next({")"})
        if tok.text != ")":
            raise ParseError(f"expected ')' but found {tok.text!r}", tok.span, {")"})

    def ident(self) -> str:
        tok = self.next({"identifier"})
        if tok.text in "()" or tok.text in KEYWORDS or _NUMBER.match(tok.text):
            raise ParseError(f"expected identifier but found {tok.text!r}", tok.span, {"identifier"})
        return tok.text

    def expr(self) -> Expr:
        tok = self.next(_EXPR_START)
        if tok.text == ")":
            raise ParseError("unexpected ')'", tok.span, _EXPR_START)
        if tok.text != "(":
            if _NUMBER.match(tok.text):
                return Real(float(tok.text))
            if tok.text in KEYWORDS:
                raise ParseError(f"keyword {tok.text!r} outside a form", tok.span, _EXPR_START)
            return Var(tok.text)

        head = self.next(set(KEYWORDS))
        form = head.text
        if form not in KEYWORDS:
            raise ParseError(f"unknown form {form!r}", head.span, set(KEYWORDS))
        if form in _BINOPS:
            node = BinOp(_BINOPS[form], self.expr(), self.expr())
        elif form == "if0":
            node = If0(self.expr(), self.expr(), self.expr())
        elif form == "pair":
            node = Pair(self.expr(), self.expr())
        elif form == "proj":
            idx = self.next({"1", "2"})
            if idx.text not in ("1", "2"):
                raise ParseError(f"projection index must be 1 or 2, found {idx.text!r}", idx.span, {"1", "2"})
            node = Proj(int(idx.text), self.expr())
        elif form == "lam":
            node = Lam(self.ident(), self.expr())
        elif form == "app":
            node = App(self.expr(), self.expr())
        elif form == "ref":
            node = Ref(self.expr())
        elif form == "read":
            node = Read(self.expr())
        else:
            node = Write(self.expr(), self.expr())
        self.expect_close()
        return node


def parse_program(text: str) -> Expr:
    p = _Parser(text)
    try:
        e = p.expr()
    except RecursionError:
        raise ParseError("program nested too deeply", p.eof_span(), ()) from None
    extra = p.peek()
    if extra is not None:
        raise ParseError(f"trailing input {extra.text!r}", extra.span, {"end of input"})
    return e


def unparse(e: Expr) -> str:
    """Canonical printer; ``parse_program(unparse(e)) == e``."""
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Real):
        return repr(float(e.value))
    if isinstance(e, BinOp):
        return f"({e.op.value} {unparse(e.left)} {unparse(e.right)})"
    if isinstance(e, If0):
        return f"(if0 {unparse(e.guard)} {unparse(e.then)} {unparse(e.orelse)})"
    if isinstance(e, Pair):
        return f"(pair {unparse(e.first)} {unparse(e.second)})"
    if isinstance(e, Proj):
        return f"(proj {e.index} {unparse(e.expr)})"
    if isinstance(e, Lam):
        return f"(lam {e.param} {unparse(e.body)})"
    if isinstance(e, App):
        return f"(app {unparse(e.fn)} {unparse(e.arg)})"
    if isinstance(e, Ref):
        return f"(ref {unparse(e.expr)})"
    if isinstance(e, Read):
        return f"(read {unparse(e.expr)})"
    if isinstance(e, Write):
        return f"(write {unparse(e.target)} {unparse(e.value)})"
    raise TypeError(f"not an expression: {e!r}")


# ------------------------------------------------------------------ inputs

def _no_duplicates(pairs):
    seen = {}
    for k, v in pairs:
        if k in seen:
            raise InputError(f"duplicate name {k!r}")
        seen[k] = v
    return seen


def parse_metric(text) -> Metric:
    if text not in ("diff", "disc"):
        raise UnknownMetric(text)
    return Metric(text)


def parse_inputs(text: str) -> dict[str, tuple[float, str, Metric]]:
    """Parse ``{"x": {"value": 21, "source": "o", "metric": "diff"}, ...}``."""
    try:
        doc = json.loads(text, object_pairs_hook=_no_duplicates)
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed inputs document: {exc}") from None
    return inputs_from_json(doc)


def inputs_from_json(doc) -> dict[str, tuple[float, str, Metric]]:
    if not isinstance(doc, dict):
        raise InputError("inputs document must be a JSON object")
    out = {}
    for name, entry in doc.items():
        if not name:
            raise InputError("input names must be non-empty")
        if not isinstance(entry, dict) or set(entry) != {"value", "source", "metric"}:
            raise InputError(f"input {name!r} must have exactly value, source and metric")
        value, source = entry["value"], entry["source"]
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise InputError(f"input {name!r}: value must be a finite number")
        if not isinstance(source, str) or not source:
            raise InputError(f"input {name!r}: source must be a non-empty string")
        out[name] = (float(value), source, parse_metric(entry["metric"]))
    return out


def inputs_to_json(inputs) -> dict:
    return {
        name: {"value": r, "source": o, "metric": m.value}
        for name, (r, o, m) in inputs.items()
    }


# ------------------------------------------------------------------ results

def json_number(q: float):
    if math.isinf(q):
        return "inf"
    if q == int(q) and abs(q) < 2**53:
        return int(q)
    return q


def result_to_json(r: EvalResult) -> dict:
    v = r.value
    if isinstance(v, TaggedReal):
        senv = {o: json_number(q) for o, q in sorted(v.senv.items())}
        metric = v.metric.value
    else:
        senv, metric = {}, None
    return {"value": str(v) if not isinstance(v, TaggedReal) else fmt_num(v.value),
            "senv": senv, "metric": metric, "steps": r.steps}


def render_result(r: EvalResult) -> str:
    return json.dumps(result_to_json(r), separators=(",", ":"))

