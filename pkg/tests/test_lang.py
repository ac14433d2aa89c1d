import pytest
from hypothesis import given, strategies as st

from aisinv import format, parse
from aisinv.lang import (
    Assign, BinOp, ExpFn, IntLit, ParseError, SimAssign, VarRef, While, format_expr, parse_assignment, parse_expr,
)
from tests.conftest import corpus_text


@pytest.mark.parametrize("name", ["gcd_lcm.whl", "power.whl", "multiply.whl"])
def test_corpus_round_trips(name):
    p = parse(corpus_text(name))
    assert parse(format(p)) == p


def test_gcd_structure(gcd):
    assert gcd.params == ("a", "b")
    assert [w.loop_id for w in gcd.loops()] == ["L0", "L1", "L2"]
    assert gcd.assigned_vars() == ["x", "y", "u", "v"]
    # (x, y, u, v) := (a, b, b, 0) reads no lhs, so it becomes four assignments
    assert [s.lhs for s in gcd.body[:4]] == ["x", "y", "u", "v"]
    assert all(isinstance(s, Assign) for s in gcd.body[:4])


def test_simassign_kept_when_rhs_reads_lhs():
    p = parse("{a > 0}\n(x, y) := (a, a);\n(x, y) := (y, x);\n")
    assert isinstance(p.body[-1], SimAssign)


def test_exp_and_precedence():
    e = parse_expr("z * exp(x, y) - 2 * (a + b)")
    assert e == BinOp("sub", BinOp("mul", VarRef("z"), ExpFn(VarRef("x"), VarRef("y"))),
                      BinOp("mul", IntLit(2), BinOp("add", VarRef("a"), VarRef("b"))))
    assert format_expr(e) == "z * exp(x, y) - 2 * (a + b)"
    assert format_expr(parse_expr("a - (b - c)")) == "a - (b - c)"


def test_labels_override_auto_ids():
    p = parse("{n >= 0}\ni := 0;\nouter: while i < n do\n  i := i + 1;\nend while\n")
    assert p.loops()[0].loop_id == "outer"
    assert "outer: while" in format(p)


def test_parse_assignment():
    s = parse_assignment("x := x + 2")
    assert s.lhs == "x" and s.rhs == BinOp("add", VarRef("x"), IntLit(2))


@pytest.mark.parametrize("source, line, col", [
    ("{a > 0}\nx := (a + ;\n", 2, 11),
    ("{a > 0}\nx := a;\nwhile x > 0 do\nend while\n", 4, 1),
    ("{a > 0}\nx := 1.5;\n", 2, 6),
])
def test_errors_carry_position(source, line, col):
    with pytest.raises(ParseError) as exc:
        parse(source)
    assert (exc.value.line, exc.value.col) == (line, col)
    assert str(exc.value).startswith(f"line {line}, column {col}:")


def test_rejects_assignment_to_param():
    with pytest.raises(ParseError, match="parameter 'a'"):
        parse("{a > 0}\na := a + 1;\n")


def test_rejects_use_before_assign():
    with pytest.raises(ParseError, match="'y' is read before"):
        parse("{a > 0}\nx := y;\n")


def test_loop_body_assignments_do_not_escape():
    with pytest.raises(ParseError):
        parse("{a > 0}\nx := a;\nwhile x > 0 do\n  y := 1;\n  x := x - 1;\nend while\nz := y;\n")


names = st.sampled_from(["x", "y", "z", "a"])
exprs = st.recursive(
    st.one_of(names.map(VarRef), st.integers(0, 50).map(IntLit)),
    lambda inner: st.one_of(
        st.builds(BinOp, st.sampled_from(["add", "sub", "mul", "div", "mod"]), inner, inner),
        st.builds(ExpFn, inner, inner),
    ),
    max_leaves=12,
)


@given(exprs)
def test_expression_printing_round_trips(e):
    assert parse_expr(format_expr(e)) == e


@given(st.lists(st.tuples(st.sampled_from(["x", "y", "z"]), exprs), min_size=1, max_size=6))
def test_program_printing_round_trips(assigns):
    source = "{a > 0}\nx := a;\ny := a;\nz := a;\nwhile x > 0 do\n" + "".join(
        f"  {n} := {format_expr(e)};\n" for n, e in assigns) + "end while\n"
    p = parse(source)
    assert isinstance(p.body[-1], While)
    assert parse(format(p)) == p
