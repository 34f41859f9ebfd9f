import logging

import numpy as np
import pytest

from src.core.errors import BracketViolated, MaxItersExceeded
from src.core.schemas import GridFunction, OperatorVariant, SchemeParams, SolveMethod
from src.modules import scheme
from src.modules.domains import build_grid, make_ball, make_rectangle
from src.modules.expressions import ScalarField
from src.modules.scheme import (
    bracket_from_barriers,
    continuation_schedule,
    discrete_gradient,
    discrete_hessian_extremes,
    discrete_residual,
    interpolate,
    max_error,
    monotone_gradient_magnitude,
    monotonicity_probe,
    solve,
    weight_primitive,
    weight_value,
)


class TestWeight:
    @pytest.mark.parametrize("alpha,eps", [(-0.5, 0.1), (0.5, 0.1), (1.5, 0.05)])
    def test_primitive_derivative_is_the_weight(self, alpha, eps):
        q = np.array([-0.7, 0.3, 2.0])
        step = 1e-6
        slope = (weight_primitive(q + step, eps, alpha) - weight_primitive(q - step, eps, alpha)) / (2 * step)
        np.testing.assert_allclose(slope, weight_value(q, eps, alpha), rtol=1e-6)

    def test_unregularised_primitive(self):
        q = np.array([-4.0, 0.0, 4.0])
        np.testing.assert_allclose(weight_primitive(q, 0.0, 0.5), [-8.0 / 1.5, 0.0, 8.0 / 1.5])

    def test_primitive_is_odd(self):
        q = np.linspace(-2.0, 2.0, 9)
        np.testing.assert_allclose(weight_primitive(-q, 0.2, -0.5), -weight_primitive(q, 0.2, -0.5))


class TestStencils:
    def test_hessian_extremes_on_a_saddle(self):
        grid = build_grid(make_rectangle((0.0, 0.0), (1.0, 1.0)), 0.25)
        u = interpolate(ScalarField.from_source("x^2 - y^2", ("x", "y")), grid)
        ext = discrete_hessian_extremes(u, int(grid.interior[0]))
        assert ext.differences["e1"] == pytest.approx(2.0)
        assert ext.differences["e2"] == pytest.approx(-2.0)
        assert ext.differences["d1"] == pytest.approx(0.0, abs=1e-10)
        assert ext.differences["d2"] == pytest.approx(0.0, abs=1e-10)
        assert ext.lambda_min == pytest.approx(-2.0)
        assert ext.lambda_max == pytest.approx(2.0)

    def test_radial_origin_uses_the_ghost_node(self):
        grid = build_grid(make_ball((0.0, 0.0), 1.0), 0.25)
        u = interpolate(ScalarField.from_source("x^2 + y^2", ("x", "y")), grid)
        ext = discrete_hessian_extremes(u, 0)
        assert ext.differences["e1"] == pytest.approx(2.0)
        assert ext.differences["theta"] == pytest.approx(2.0)

    def test_gradients(self):
        grid = build_grid(make_rectangle((0.0, 0.0), (1.0, 1.0)), 0.25)
        u = interpolate(ScalarField.from_source("x^2 + y^2", ("x", "y")), grid)
        node = int(grid.interior[0])
        x, y = grid.coords[node]
        assert discrete_gradient(u, node).components == pytest.approx((2 * x, 2 * y))

    def test_upwind_magnitude_of_a_line(self, sandwich_problem):
        grid = build_grid(sandwich_problem.domain, 0.25)
        u = interpolate(ScalarField.from_source("x"), grid)
        assert monotone_gradient_magnitude(u, 3) == pytest.approx(1.0)
        assert monotone_gradient_magnitude(u, 3, b_sign=-1.0) == pytest.approx(1.0)

    def test_boundary_node_rejected(self, sandwich_problem):
        grid = build_grid(sandwich_problem.domain, 0.25)
        with pytest.raises(ValueError):
            discrete_gradient(GridFunction.constant(grid, 0.0), 0)


class TestMonotonicity:
    def test_upwind_scheme_is_monotone(self, make_problem):
        prob = make_problem(alpha=0.0, beta=2.0, b="2.5")
        grid = build_grid(prob.domain, 1.0 / 32.0)
        assert monotonicity_probe(prob, grid, SchemeParams(), seed=3).passed

    def test_centred_gradient_breaks_monotonicity(self, make_problem):
        prob = make_problem(alpha=0.0, beta=2.0, b="2.5")
        grid = build_grid(prob.domain, 1.0 / 32.0)
        report = monotonicity_probe(prob, grid, SchemeParams(monotone_gradient=False), seed=3)
        assert not report.passed
        assert report.neighbour_increase > 0

    def test_degenerate_and_rectangle(self, make_problem):
        prob = make_problem(alpha=1.0, beta=2.0, domain=make_rectangle((0.0, 0.0), (1.0, 1.0)))
        grid = build_grid(prob.domain, 0.125)
        assert monotonicity_probe(prob, grid, SchemeParams(), seed=1).passed


class TestSolve:
    def test_continuation_schedule(self):
        levels = continuation_schedule(1.0 / 16.0, SchemeParams())
        assert len(levels) == 4
        assert levels[0] == pytest.approx(0.25)
        assert levels[-1] == pytest.approx(1.0 / 16.0)
        assert np.all(np.diff(levels) < 0)
        assert continuation_schedule(1.0 / 16.0, SchemeParams(continuation_steps=1)).tolist() == [1.0 / 16.0]

    @pytest.mark.parametrize("method", [SolveMethod.NEWTON, SolveMethod.EXPLICIT])
    @pytest.mark.parametrize("alpha", [-0.5, 0.0, 1.0])
    @pytest.mark.parametrize("b", ["0", "1", "-2"])
    def test_zero_data_gives_zero(self, make_problem, b, alpha, method):
        prob = make_problem(alpha=alpha, beta=0.5, b=b, f="0", phi="0")
        grid = build_grid(prob.domain, 0.125)
        u, report = solve(prob, grid, SchemeParams(method=method))
        assert report.converged
        assert u.sup_norm() == 0.0

    def test_zero_data_on_the_square(self, make_problem):
        prob = make_problem(alpha=-0.5, beta=0.5, b="1", f="0", domain=make_rectangle((0.0, 0.0), (1.0, 1.0)))
        u, report = solve(prob, build_grid(prob.domain, 0.125))
        assert report.converged
        assert u.sup_norm() == 0.0

    def test_linear_solution_is_reproduced(self, make_problem):
        prob = make_problem(alpha=0.5, beta=1.0, b="0", f="sign(x)*abs(x)^1.5", phi="x")
        grid = build_grid(prob.domain, 0.125)
        u, report = solve(prob, grid)
        assert report.converged
        assert max_error(u, ScalarField.from_source("x")) < 1e-7

    @pytest.mark.parametrize(
        "variant,f_expr", [(OperatorVariant.TRACE, "x^2 + y^2 - 4"), (OperatorVariant.PUCCI_PLUS, "x^2 + y^2 - 8")]
    )
    def test_quadratic_on_the_square(self, make_problem, variant, f_expr):
        prob = make_problem(
            b="0",
            f=f_expr,
            phi="x^2 + y^2",
            variant=variant,
            domain=make_rectangle((0.0, 0.0), (1.0, 1.0)),
        )
        grid = build_grid(prob.domain, 1.0 / 16.0)
        u, _ = solve(prob, grid)
        assert max_error(u, ScalarField.from_source("x^2 + y^2", ("x", "y"))) < 1e-6
        assert np.max(np.abs(discrete_residual(u, prob).values)) < 1e-6

    def test_radial_error_decreases(self, make_problem):
        prob = make_problem(
            b="0",
            f="x^2 + y^2 - 4",
            phi="x^2 + y^2",
            variant=OperatorVariant.TRACE,
            domain=make_ball((0.0, 0.0), 1.0),
        )
        exact = ScalarField.from_source("x^2 + y^2", ("x", "y"))
        errors = []
        for h in (0.125, 0.0625):
            u, _ = solve(prob, build_grid(prob.domain, h))
            errors.append(max_error(u, exact))
        assert errors[1] < errors[0]

    def test_explicit_and_newton_agree(self, sandwich_problem):
        grid = build_grid(sandwich_problem.domain, 0.125)
        u_newton, _ = solve(sandwich_problem, grid, SchemeParams(tol=1e-9))
        u_explicit, report = solve(sandwich_problem, grid, SchemeParams(method=SolveMethod.EXPLICIT, tol=1e-9))
        assert report.bracket_preserved
        np.testing.assert_allclose(u_explicit.values, u_newton.values, atol=1e-6)

    def test_solution_stays_in_the_bracket(self, sandwich_problem):
        grid = build_grid(sandwich_problem.domain, 0.0625)
        bracket = bracket_from_barriers(sandwich_problem, grid)
        u, report = solve(sandwich_problem, grid, bracket=bracket)
        assert report.bracket_preserved
        assert np.all(u.values >= bracket.lower.values - 1e-9)
        assert np.all(u.values <= bracket.upper.values + 1e-9)
        assert np.all(u.interior_values() > 0)

    def test_uncertified_barrier_is_reported(self, sandwich_problem, monkeypatch, caplog):
        original = scheme.certified_barrier

        def failing(*args, **kwargs):
            return original(*args, **kwargs).model_copy(update={"certified": False})

        monkeypatch.setattr(scheme, "certified_barrier", failing)
        grid = build_grid(sandwich_problem.domain, 0.125)
        with caplog.at_level(logging.WARNING, logger=scheme.logger.name):
            bracket = bracket_from_barriers(sandwich_problem, grid)
        assert not bracket.upper_certified
        assert bracket.lower_certified
        assert not bracket.certified
        assert set(bracket.residuals) == {"super"}
        assert any("not certified" in rec.getMessage() for rec in caplog.records)

        _, report = solve(sandwich_problem, grid)
        assert report.converged
        assert not report.bracket_certified
        assert report.bracket_residuals == bracket.residuals

    def test_certified_bracket_is_reported(self, sandwich_problem):
        grid = build_grid(sandwich_problem.domain, 0.125)
        assert bracket_from_barriers(sandwich_problem, grid).certified
        _, report = solve(sandwich_problem, grid)
        assert report.bracket_certified

    def test_newton_checks_the_converged_iterate_against_the_bracket(self, sandwich_problem):
        # a negative band no iterate touching the boundary can satisfy
        grid = build_grid(sandwich_problem.domain, 0.125)
        with pytest.raises(BracketViolated):
            solve(sandwich_problem, grid, SchemeParams(bracket_tol=-10.0))

    def test_newton_keeps_an_enclosed_solution(self, sandwich_problem):
        grid = build_grid(sandwich_problem.domain, 0.125)
        _, report = solve(sandwich_problem, grid, SchemeParams(method=SolveMethod.NEWTON))
        assert report.bracket_preserved
        assert report.bracket_margin_history[-1] >= -SchemeParams().bracket_tol

    def test_iteration_cap(self, make_problem):
        prob = make_problem(alpha=0.5)
        grid = build_grid(prob.domain, 0.125)
        params = SchemeParams(max_iters=1, continuation_steps=1, tol=1e-30)
        with pytest.raises(MaxItersExceeded) as exc:
            solve(prob, grid, params)
        assert exc.value.report is not None
        assert not exc.value.report.converged
