import math

import numpy as np
import pytest

from src.core.errors import FieldEvalError, KinkWarning, ParseError
from src.modules.expressions import (
    ScalarField,
    differentiate,
    parse_expression,
    simplify,
    to_source,
)


def value(src: str, **env) -> float:
    return float(parse_expression(src).evaluate({k: np.asarray(v, dtype=float) for k, v in env.items()}))


class TestParser:
    def test_precedence(self):
        assert value("1 + 2*x", x=3) == 7.0
        assert value("(1 + 2)*x", x=3) == 9.0
        assert value("8/2/2") == 2.0

    def test_power_is_right_associative(self):
        assert value("2^3^2") == 512.0
        assert value("2**3") == 8.0

    def test_unary_minus_binds_looser_than_power(self):
        assert value("-x^2", x=3) == -9.0
        assert value("2^-1") == 0.5

    def test_constants_and_functions(self):
        assert value("cos(pi)") == pytest.approx(-1.0)
        assert value("max(x, 2)", x=1) == 2.0
        assert value("sqrt(4) + log(exp(1))") == pytest.approx(3.0)
        assert value("1e-3*1000") == pytest.approx(1.0)

    def test_error_position_points_at_offending_token(self):
        with pytest.raises(ParseError) as exc:
            parse_expression("1 + * x")
        assert exc.value.position == 4
        assert "number" in exc.value.expected

    def test_unterminated_call_reports_end_of_input(self):
        with pytest.raises(ParseError) as exc:
            parse_expression("sin(x")
        assert exc.value.position == len("sin(x")

    def test_wrong_arity(self):
        with pytest.raises(ParseError):
            parse_expression("min(x)")

    def test_empty_source(self):
        with pytest.raises(ParseError) as exc:
            parse_expression("   ")
        assert exc.value.position == 0

    def test_unknown_character(self):
        with pytest.raises(ParseError) as exc:
            parse_expression("x $ 2")
        assert exc.value.position == 2

    @pytest.mark.parametrize(
        "src",
        ["1 - (x - y)", "x/(y*2)", "-(x + 1)^2", "(2^3)^2", "cos(pi*x/2)", "x - -1", "abs(x)^(-0.5)*x"],
    )
    def test_printer_reparses_to_the_same_tree(self, src):
        tree = parse_expression(src)
        assert parse_expression(to_source(tree)) == tree


class TestDifferentiation:
    def test_polynomial(self):
        d = differentiate(parse_expression("x^3 + 2*x"), "x")
        assert float(d.evaluate({"x": np.asarray(2.0)})) == pytest.approx(14.0)

    def test_chain_rule(self):
        d = differentiate(parse_expression("sin(pi*x/2)"), "x")
        x = 0.3
        assert float(d.evaluate({"x": np.asarray(x)})) == pytest.approx(0.5 * math.pi * math.cos(0.5 * math.pi * x))

    def test_quotient_and_log(self):
        d = differentiate(parse_expression("log(x)/x"), "x")
        x = 2.0
        assert float(d.evaluate({"x": np.asarray(x)})) == pytest.approx((1 - math.log(x)) / x ** 2)

    def test_partial_derivative_ignores_other_variable(self):
        d = differentiate(parse_expression("x*y^2"), "y")
        assert float(d.evaluate({"x": np.asarray(3.0), "y": np.asarray(2.0)})) == pytest.approx(12.0)

    def test_kinks_warn_and_use_right_continuous_sign(self):
        with pytest.warns(KinkWarning):
            d = differentiate(parse_expression("abs(x)"), "x")
        assert float(d.evaluate({"x": np.asarray(0.0)})) == 1.0
        assert float(d.evaluate({"x": np.asarray(-2.0)})) == -1.0

    def test_simplify_folds_constants(self):
        assert to_source(simplify(parse_expression("0*x + 1*y + 2*3"))) == "y + 6"


class TestScalarField:
    def test_vectorised_evaluation(self):
        u = ScalarField.from_source("x^2", ("x",))
        np.testing.assert_allclose(u(np.array([[1.0], [2.0]])), [1.0, 4.0])
        assert u(3.0) == 9.0

    def test_gradient_and_hessian_in_two_dimensions(self):
        u = ScalarField.from_source("x^2*y", ("x", "y"))
        np.testing.assert_allclose(u.gradient([1.0, 2.0]), [4.0, 1.0])
        np.testing.assert_allclose(u.hessian([1.0, 2.0]), [[4.0, 2.0], [2.0, 0.0]])

    def test_checked_raises_on_undefined_values(self):
        f = ScalarField.from_source("1/x", ("x",), name="f")
        with pytest.raises(FieldEvalError) as exc:
            f.checked(np.array([[1.0], [0.0]]))
        assert exc.value.field_name == "f"

    def test_kink_mask(self):
        u = ScalarField.from_source("abs(x - 0.5)", ("x",))
        mask = u.kink_mask(np.array([[0.0], [0.5], [1.0]]))
        assert mask.tolist() == [False, True, False]
        assert u.has_kinks

    def test_constant_detection(self):
        assert ScalarField.from_source("2*pi", ("x",)).is_constant()
        assert not ScalarField.from_source("x", ("x",)).is_constant()
