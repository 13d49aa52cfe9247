import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coindex.errors import ArityError, EvalError, LexError, ParseError
from coindex.expr import (
    Binary,
    Call,
    Const,
    MapExpr,
    Unary,
    Var,
    add_constant,
    evaluate,
    jacobian,
    linear_combination,
    linear_map_source,
    parse_expr,
    parse_map,
    to_source,
    tokenize,
)


def kinds(source):
    return [(t.kind, t.text) for t in tokenize(source)]


def test_tokenize_simple():
    assert kinds("x1+1") == [("identifier", "x1"), ("operator", "+"), ("number", "1")]


def test_tokenize_call():
    assert kinds("sin(x2)") == [
        ("identifier", "sin"), ("parenthesis", "("), ("identifier", "x2"), ("parenthesis", ")"),
    ]


def test_tokenize_illegal_character_offset():
    with pytest.raises(LexError) as info:
        tokenize("x1 $ 2")
    assert info.value.offset == 3


def test_tokenize_offsets_are_bytes():
    with pytest.raises(LexError) as info:
        tokenize("x1 + é")
    assert info.value.offset == 5
    toks = tokenize("x1 + 2.5e-3")
    assert [t.position for t in toks] == [0, 3, 5]


def test_parse_linear_map():
    m = parse_map("2*x1, x2", 2)
    assert m.n == 2 and len(m.components) == 2


def test_parse_single_component():
    assert parse_map("x1^2 - 1", 1).n == 1


def test_parse_arity_mismatch():
    with pytest.raises(ArityError):
        parse_map("x1, x2", 3)


@pytest.mark.parametrize("source", ["x1 +", "(x1", "x1 x2", "sin x1", "x3", "x0", "foo(x1)", "x1^x1", ""])
def test_parse_errors(source):
    with pytest.raises(ParseError):
        parse_map(source, 2 if source != "" else 1)


def test_parse_error_reports_offset():
    with pytest.raises(ParseError) as info:
        parse_map("x1 + * 2", 1)
    assert info.value.offset == 5


def test_precedence():
    # power binds tighter than unary minus, which binds tighter than * and +
    assert evaluate(parse_map("-x1^2", 1), [3.0])[0] == -9.0
    assert evaluate(parse_map("1 + 2*x1^2", 1), [2.0])[0] == 9.0
    assert evaluate(parse_map("(2^3)^2", 1), [0.0])[0] == 64.0
    assert evaluate(parse_map("8/2/2", 1), [0.0])[0] == 2.0
    assert evaluate(parse_map("1 - 2 - 3", 1), [0.0])[0] == -4.0


def test_eval_examples():
    np.testing.assert_array_equal(evaluate(parse_map("x1^2 - x2, sin(x1)", 2), [0, 0]), [0, 0])
    np.testing.assert_array_equal(evaluate(parse_map("2*x1", 1), [3]), [6])


def test_eval_division_by_zero():
    with pytest.raises(EvalError):
        evaluate(parse_map("1/x1", 1), [0.0])


def test_batched_bad_mask_is_per_row():
    m = parse_map("1/x1", 1)
    vals, bad = m.values(np.array([[0.0], [2.0]]))
    assert bad.tolist() == [True, False]
    assert vals[1, 0] == 0.5


def test_jacobian_examples():
    np.testing.assert_array_equal(jacobian(parse_map("2*x1, x2", 2), [0.3, -7.0]), [[2, 0], [0, 1]])
    np.testing.assert_allclose(jacobian(parse_map("x1^2 - 1", 1), [1.0]), [[2.0]])
    np.testing.assert_allclose(jacobian(parse_map("sin(x1)", 1), [0.0]), [[1.0]])


def test_jacobian_chain_rule():
    m = parse_map("exp(x1*x2), cos(x1) / x2", 2)
    x = np.array([0.4, 1.3])
    expected = np.array([
        [x[1] * math.exp(x[0] * x[1]), x[0] * math.exp(x[0] * x[1])],
        [-math.sin(x[0]) / x[1], -math.cos(x[0]) / x[1] ** 2],
    ])
    np.testing.assert_allclose(jacobian(m, x), expected, rtol=1e-14)


@pytest.mark.parametrize("source", ["x1^(-2)", "x1^2.5", "x1^3^2", "x1^x1"])
def test_power_needs_integer_literal(source):
    with pytest.raises(ParseError):
        parse_map(source, 1)


def test_zero_power_is_one():
    m = parse_map("x1^0", 1)
    assert evaluate(m, [0.0])[0] == 1.0
    assert jacobian(m, [0.0])[0, 0] == 0.0


def test_builders():
    f = parse_map("x1^2, x2", 2)
    g = parse_map("x2, 3", 2)
    h = linear_combination([(2.0, f), (-1.0, g)])
    x = np.array([1.5, -0.5])
    np.testing.assert_allclose(evaluate(h, x), 2 * evaluate(f, x) - evaluate(g, x))
    np.testing.assert_allclose(evaluate(add_constant(f, [0.25, -1]), x), evaluate(f, x) + [0.25, -1])
    M = np.array([[1, -2], [0, 3]])
    lin = parse_map(linear_map_source(M, [0.5, 0]), 2)
    np.testing.assert_allclose(evaluate(lin, x), M @ x + [0.5, 0])


# -- random expressions --------------------------------------------------------

def _leaf(n):
    return st.one_of(
        st.integers(1, n).map(Var),
        st.floats(-3, 3, allow_nan=False).map(lambda v: Const(round(v, 3))),
    )


def _nodes(n):
    return st.recursive(
        _leaf(n),
        lambda inner: st.one_of(
            st.tuples(st.sampled_from("+-*"), inner, inner).map(lambda t: Binary(*t)),
            inner.map(lambda c: Unary("-", c)),
            st.tuples(inner, st.integers(0, 3)).map(lambda t: Binary("^", t[0], Const(float(t[1])))),
            st.tuples(st.sampled_from(["sin", "cos"]), inner).map(lambda t: Call(*t)),
        ),
        max_leaves=8,
    )


@settings(max_examples=200, deadline=None)
@given(_nodes(2))
def test_source_round_trip(node):
    again = parse_expr(to_source(node), 2)
    X = np.array([[0.3, -1.1], [1.7, 0.2]])
    m1 = MapExpr(2, (node, Const(0.0)), "")
    m2 = MapExpr(2, (again, Const(0.0)), "")
    np.testing.assert_allclose(m1.values(X)[0], m2.values(X)[0], rtol=1e-12, atol=1e-12)
    assert to_source(again) == to_source(node)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4), st.lists(st.floats(-2, 2), min_size=2, max_size=2))
def test_linear_map_jacobian_is_matrix(entries, x):
    M = np.array(entries).reshape(2, 2)
    m = parse_map(linear_map_source(M), 2)
    np.testing.assert_allclose(jacobian(m, x), M, atol=1e-12)


def test_sum_rule_on_random_pairs():
    rng = np.random.default_rng(5)
    f = parse_map("x1*sin(x2), x2^3 - x1", 2)
    g = parse_map("exp(x1) - x2, cos(x1*x2)", 2)
    h = linear_combination([(1.0, f), (1.0, g)])
    for _ in range(20):
        x = rng.uniform(-1, 1, 2)
        np.testing.assert_allclose(jacobian(h, x), jacobian(f, x) + jacobian(g, x), rtol=1e-13, atol=1e-13)
