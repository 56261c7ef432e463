import pytest

from mcd.expressions import ExpressionError, compile_expression


def test_arithmetic_and_precedence():
    expr = compile_expression("1 + 2*3 - 4/2")
    assert expr({}) == 5.0


def test_power_is_right_associative():
    assert compile_expression("2^3^2")({}) == 512.0


def test_unary_minus_and_parens():
    assert compile_expression("-(2 + 1) * 2")({}) == -6.0


def test_variables_collected_and_bound():
    expr = compile_expression("0.2 / 2^i")
    assert expr.variables == ("i",)
    assert expr({"i": 1}) == 0.1
    assert expr({"i": 2}) == 0.05


def test_schedule_style_expression():
    expr = compile_expression("1.5^(n - j)")
    assert expr({"n": 6, "j": 1}) == 7.59375


def test_unknown_variable_raises_at_eval():
    expr = compile_expression("a + 1")
    with pytest.raises(ExpressionError, match="unknown variable"):
        expr({})


@pytest.mark.parametrize("text", ["", "1 +", "(1", "1 2", "foo(2)", "$x"])
def test_malformed_inputs_rejected(text):
    with pytest.raises(ExpressionError):
        compile_expression(text)
