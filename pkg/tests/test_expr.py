import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_expression
from kappa.expr import (
    Binary,
    Const,
    EvalDomainError,
    ExprSyntaxError,
    Param,
    Unary,
    UnknownNameError,
    Var,
    eval_jet,
    evaluate,
    parse,
    to_source,
)


def _depth(node):
    if isinstance(node, (Const, Var, Param)):
        return 1
    if isinstance(node, Unary):
        return 1 + _depth(node.arg)
    return 1 + max(_depth(node.lhs), _depth(node.rhs))


def test_parse_product_of_powers():
    e = parse("rho^2 * sin(theta)^2", coords=["rho", "theta"])
    assert isinstance(e, Binary) and e.op == "*"
    assert _depth(e) == 4


def test_parse_with_parameter():
    e = parse("1 - 2*m/rho", coords=["rho"], params=["m"])
    assert isinstance(e, Binary) and e.op == "-"
    names = {n.name for n in [e.rhs.lhs.rhs] if isinstance(n, Param)}
    assert evaluate(e, {"rho": 4.0}, {"m": 1.0}) == 0.5


def test_syntax_error_position():
    with pytest.raises(ExprSyntaxError) as err:
        parse("sin(", coords=["x"])
    assert err.value.position == 4


def test_unknown_identifier_named():
    with pytest.raises(UnknownNameError) as err:
        parse("rho + zeta", coords=["rho"])
    assert err.value.name == "zeta"


def test_empty_source_rejected():
    with pytest.raises(ExprSyntaxError):
        parse("   ", coords=["x"])


def test_eval_square():
    e = parse("rho^2", coords=["rho"])
    assert evaluate(e, [3.0]) == 9.0


def test_eval_log_form():
    e = parse("-ln(1-2*m/rho)", coords=["rho"], params=["m"])
    got = evaluate(e, [4.0], {"m": 1.0})
    assert abs(got - math.log(2.0)) < 1e-15


def test_eval_pole_is_domain_error():
    e = parse("1/(rho-2)", coords=["rho"])
    with pytest.raises(EvalDomainError) as err:
        evaluate(e, [2.0])
    assert "rho - 2" in str(err.value)


def test_ln_nonpositive_domain_error():
    e = parse("ln(x)", coords=["x"])
    with pytest.raises(EvalDomainError):
        evaluate(e, [-1.0])


def test_power_noninteger_needs_positive_base():
    e = parse("x^0.5", coords=["x"])
    assert abs(evaluate(e, [4.0]) - 2.0) < 1e-15
    with pytest.raises(EvalDomainError):
        evaluate(e, [-4.0])


def test_integer_power_handles_negative_base():
    e = parse("x^3", coords=["x"])
    assert evaluate(e, [-2.0]) == -8.0
    e = parse("x^-2", coords=["x"])
    assert evaluate(e, [2.0]) == 0.25


def test_unary_minus_binds_below_power():
    # -x^2 is -(x^2)
    e = parse("-x^2", coords=["x"])
    assert evaluate(e, [3.0]) == -9.0


def test_right_associative_power():
    # 2^(3^2) = 512, not (2^3)^2 = 64; the non-literal exponent goes through
    # exp(b ln a) so the value is only close to exact
    e = parse("2^3^2", coords=[])
    assert evaluate(e, []) == pytest.approx(512.0, rel=1e-14)


def test_roundtrip_examples():
    for src in (
        "rho^2 * sin(theta)^2",
        "1 - 2*m/rho",
        "-ln(1-2*m/rho)",
        "(a + b)^2 / (a - b)",
        "-x^2 + sin(x*y)",
        "2^3^2",
        "x/(y*z)",
        "-(x + y)",
    ):
        e = parse(src, coords=["rho", "theta", "x", "y", "z"], params=["m", "a", "b"])
        assert parse(to_source(e), coords=["rho", "theta", "x", "y", "z"], params=["m", "a", "b"]) == e


def test_roundtrip_random_corpus(rng):
    coords = ["x", "y"]
    for _ in range(120):
        src = random_expression(rng, coords, ["p"], depth=3)
        e = parse(src, coords=coords, params=["p"])
        again = parse(to_source(e), coords=coords, params=["p"])
        assert again == e, to_source(e)


@given(st.floats(-3, 3, allow_nan=False), st.floats(-3, 3, allow_nan=False))
@settings(max_examples=40, deadline=None)
def test_eval_matches_python(x, y):
    e = parse("x*y + sin(x) - cos(y)/2 + exp(x/8)", coords=["x", "y"])
    want = x * y + math.sin(x) - math.cos(y) / 2.0 + math.exp(x / 8.0)
    assert evaluate(e, [x, y]) == pytest.approx(want, rel=1e-15, abs=1e-15)


def test_mapping_point_form():
    e = parse("x + 2*y", coords=["x", "y"])
    assert evaluate(e, {"x": 1.0, "y": 2.0}) == 5.0


def test_unbound_parameter_rejected():
    e = parse("m*x", coords=["x"], params=["m"])
    with pytest.raises(Exception):
        evaluate(e, [1.0], {})


def test_function_name_cannot_be_coordinate():
    with pytest.raises(Exception):
        parse("sin + 1", coords=["sin"])


def test_eval_jet_constant_expression():
    e = parse("3*2", coords=["x"])
    j = eval_jet(e, [0.5], order=2)
    assert j.value == 6.0 and j.grad[0] == 0.0
