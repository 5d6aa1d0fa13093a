import json

import pytest
from hypothesis import given, strategies as st

from senstrace.core import (
    App, BinOp, If0, Lam, Metric, Op, Pair, Proj, Read, Real, Ref, Var, Write,
)
from senstrace.errors import InputError, ParseError, UnknownMetric
from senstrace.evaluator import eval_entry
from senstrace.frontend import (
    inputs_to_json, parse_inputs, parse_program, render_result, result_to_json, unparse,
)


def test_parse_forms():
    assert parse_program("(+ x x)") == BinOp(Op.PLUS, Var("x"), Var("x"))
    assert parse_program("(scalel 2 x)") == BinOp(Op.TIMES_L, Real(2.0), Var("x"))
    assert parse_program("(app (lam y (+ y y)) x)") == App(Lam("y", BinOp(Op.PLUS, Var("y"), Var("y"))), Var("x"))
    assert parse_program("(proj 2 (pair 1 2))") == Proj(2, Pair(Real(1.0), Real(2.0)))
    assert parse_program("(if0 g (read (ref 1)) (write l 2))") == If0(
        Var("g"), Read(Ref(Real(1.0))), Write(Var("l"), Real(2.0)))


def test_numbers_and_comments():
    assert parse_program("; note\n -1.5e2 ; trailing") == Real(-150.0)
    assert parse_program(".5") == Real(0.5)


@pytest.mark.parametrize("text,span", [
    ("(+ x", (4, 4)),
    ("(foo x y)", (1, 4)),
    ("(proj 3 x)", (6, 7)),
    ("(lam 3 x)", (5, 6)),
    ("x y", (2, 3)),
    (")", (0, 1)),
    ("(+ x y z)", (7, 8)),
])
def test_parse_errors_carry_span(text, span):
    with pytest.raises(ParseError) as info:
        parse_program(text)
    assert tuple(info.value.span) == span
    assert info.value.expected


def test_missing_paren_expects_close():
    with pytest.raises(ParseError) as info:
        parse_program("(+ x y")
    assert info.value.expected == {")"}


names = st.sampled_from(["x", "y", "z", "acc", "k2"])
nums = st.floats(-1e6, 1e6, allow_nan=False).map(Real)
exprs = st.recursive(
    st.one_of(names.map(Var), nums),
    lambda sub: st.one_of(
        st.builds(BinOp, st.sampled_from(list(Op)), sub, sub),
        st.builds(If0, sub, sub, sub),
        st.builds(Pair, sub, sub),
        st.builds(Proj, st.sampled_from([1, 2]), sub),
        st.builds(Lam, names, sub),
        st.builds(App, sub, sub),
        st.builds(Ref, sub),
        st.builds(Read, sub),
        st.builds(Write, sub, sub),
    ),
    max_leaves=25,
)


@given(exprs)
def test_round_trip(e):
    assert parse_program(unparse(e)) == e


def test_inputs_document():
    doc = {"x": {"value": 21, "source": "o", "metric": "diff"}}
    inputs = parse_inputs(json.dumps(doc))
    assert inputs == {"x": (21.0, "o", Metric.DIFF)}
    assert inputs_to_json(inputs) == {"x": {"value": 21.0, "source": "o", "metric": "diff"}}


@pytest.mark.parametrize("doc,err", [
    ('{"x": {"value": 1, "source": "o", "metric": "l2"}}', UnknownMetric),
    ('{"x": {"value": 1, "source": "o"}}', InputError),
    ('{"x": {"value": "1", "source": "o", "metric": "diff"}}', InputError),
    ('{"x": {"value": 1, "source": "", "metric": "diff"}}', InputError),
    ('{"x": {"value": 1, "source": "o", "metric": "diff"}, "x": {"value": 2, "source": "o", "metric": "diff"}}', InputError),
    ('[1]', InputError),
    ('{', InputError),
])
def test_bad_inputs(doc, err):
    with pytest.raises(err):
        parse_inputs(doc)


def test_render_worked_example():
    r = eval_entry({"x": (21.0, "o", Metric.DIFF)}, parse_program("(+ x x)"))
    assert render_result(r) == '{"value":"42","senv":{"o":2},"metric":"diff","steps":0}'


def test_render_non_real():
    r = eval_entry({"x": (1.0, "o", Metric.DIFF)}, parse_program("(pair x (lam y y))"))
    doc = result_to_json(r)
    assert doc["value"] == "<1@{o:1}#diff,<closure>>"
    assert doc["metric"] is None


def test_too_deep_is_a_parse_error():
    with pytest.raises(ParseError):
        parse_program("(+ 1 " * 100_000 + "1" + ")" * 100_000)
