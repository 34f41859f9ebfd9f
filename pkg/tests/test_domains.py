import math

import numpy as np
import pytest

from src.core.errors import (
    ExponentOutOfRange,
    NonRadialData,
    OutsideDomain,
    SpacingTooCoarse,
    UnboundedCoefficient,
)
from src.core.schemas import OperatorVariant
from src.modules.domains import (
    build_grid,
    cap,
    distance_profile,
    domain_center,
    make_ball,
    make_interval,
    make_rectangle,
    manufacture_rhs,
    points_at_distance,
    sample_points,
)


class TestDistance:
    def test_interval_profile_in_the_cap_region(self):
        dom = make_interval(-1.0, 1.0)
        prof = distance_profile(dom, 0.25)
        assert prof.d == pytest.approx(0.75)
        assert prof.grad.tolist() == [-1.0]
        assert not prof.in_collar
        assert prof.d_ext == pytest.approx(0.703125)

    def test_extension_matches_distance_inside_collar(self):
        dom = make_interval(0.0, 1.0)
        prof = distance_profile(dom, 0.1)
        assert prof.in_collar
        assert prof.d_ext == pytest.approx(prof.d)
        assert prof.grad_ext.tolist() == [1.0]

    def test_ball_hessian(self):
        dom = make_ball((0.0, 0.0), 1.0)
        prof = distance_profile(dom, [0.5, 0.0])
        assert prof.d == pytest.approx(0.5)
        np.testing.assert_allclose(prof.hess.to_array(), [[0.0, 0.0], [0.0, -2.0]], atol=1e-12)

    def test_outside_point_rejected(self):
        with pytest.raises(OutsideDomain):
            distance_profile(make_interval(0.0, 1.0), 1.5)

    def test_cap_is_c2_and_saturates(self):
        value, slope, curvature = cap(np.array([0.5, 1.0, 2.0, 3.0]))
        assert value.tolist() == pytest.approx([0.5, 1.0, 1.5, 1.5])
        assert slope.tolist() == pytest.approx([1.0, 1.0, 0.0, 0.0])
        assert curvature.tolist() == pytest.approx([0.0, 0.0, 0.0, 0.0])
        t = np.linspace(0.0, 3.0, 301)
        assert np.all(np.diff(cap(t)[0]) >= -1e-15)

    def test_points_at_distance(self):
        dom = make_rectangle((0.0, 0.0), (1.0, 1.0))
        pts = points_at_distance(dom, [0.1, 0.2, 0.05, 0.15])
        for p, d in zip(pts, [0.1, 0.2, 0.05, 0.15]):
            assert distance_profile(dom, p).d == pytest.approx(d)


class TestGrid:
    def test_interval_spacing_is_rounded_down(self):
        grid = build_grid(make_interval(-1.0, 1.0), 0.3)
        assert grid.h == pytest.approx(2.0 / 7.0)
        assert grid.shape == (8,)
        assert grid.boundary.tolist() == [0, 7]
        assert len(grid.interior) == 6

    def test_rectangle(self):
        grid = build_grid(make_rectangle((0.0, 0.0), (1.0, 2.0)), 0.25)
        assert grid.shape == (5, 9)
        assert len(grid.interior) == 21
        assert int(grid.corner.sum()) == 4

    def test_ball_is_radial(self):
        grid = build_grid(make_ball((0.0, 0.0), 1.0), 0.25)
        assert grid.radial
        assert grid.n_nodes == 5
        assert grid.interior.tolist() == [0, 1, 2, 3]
        assert grid.boundary.tolist() == [4]

    def test_spacing_must_not_exceed_collar(self):
        with pytest.raises(SpacingTooCoarse):
            build_grid(make_interval(0.0, 1.0), 0.3)
        assert build_grid(make_interval(0.0, 1.0), 0.25).h == pytest.approx(0.25)

    def test_node_distance(self):
        grid = build_grid(make_interval(-1.0, 1.0), 0.5)
        assert grid.node_distance().tolist() == pytest.approx([0.0, 0.5, 1.0, 0.5, 0.0])


class TestConstruction:
    def test_default_collar_is_half_inradius(self):
        assert make_interval(-1.0, 1.0).collar_width == pytest.approx(0.5)
        assert make_rectangle((0.0, 0.0), (1.0, 2.0)).collar_width == pytest.approx(0.25)

    def test_collar_too_wide(self):
        with pytest.raises(ValueError):
            make_interval(0.0, 1.0, collar_width=0.4)

    def test_center(self):
        assert domain_center(make_rectangle((0.0, 0.0), (1.0, 2.0))) == (0.5, 1.0)
        assert domain_center(make_ball((1.0, -1.0), 0.5)) == (1.0, -1.0)

    def test_sample_points_cover_the_closure(self):
        pts = sample_points(make_interval(-1.0, 1.0), 5)
        assert pts.ravel().tolist() == [-1.0, -0.5, 0.0, 0.5, 1.0]


class TestValidation:
    def test_fills_in_bounds(self, make_problem):
        prob = make_problem(b="1 + x", f="2*cos(x)")
        assert prob.b_sup == pytest.approx(2.0)
        assert prob.f_sup == pytest.approx(2.0)
        assert prob.b_lipschitz_bound == pytest.approx(1.0)

    def test_beta_above_critical(self, make_problem):
        with pytest.raises(ExponentOutOfRange) as exc:
            make_problem(alpha=0.0, beta=3.0)
        assert exc.value.which == "beta"
        assert "(0, alpha+2]" in str(exc.value)

    def test_critical_beta_is_admissible(self, make_problem):
        assert make_problem(alpha=0.0, beta=2.0).exponents.critical

    def test_alpha_at_minus_one(self, make_problem):
        with pytest.raises(ExponentOutOfRange) as exc:
            make_problem(alpha=-1.0, beta=0.5)
        assert exc.value.which == "alpha"

    def test_unbounded_coefficient(self, make_problem):
        with pytest.raises(UnboundedCoefficient):
            make_problem(f="1/x")

    def test_ball_data_must_be_radial(self, make_problem):
        ball = make_ball((0.0, 0.0), 1.0)
        assert make_problem(domain=ball, f="x^2 + y^2").domain == ball
        with pytest.raises(NonRadialData):
            make_problem(domain=ball, f="x")


class TestManufacture:
    def test_cosine(self, make_problem):
        prob = make_problem()
        rhs = manufacture_rhs("cos(pi*x/2)", prob)
        x = 0.5
        c = math.cos(math.pi * x / 2)
        expected = (math.pi ** 2 / 4) * c + (math.pi / 2) * abs(math.sin(math.pi * x / 2)) + c
        assert rhs.field(x) == pytest.approx(expected, abs=1e-10)
        assert not rhs.singular_points
        assert not rhs.kinked

    def test_singular_points_for_negative_alpha(self, make_problem):
        prob = make_problem(alpha=-0.5, beta=1.0)
        rhs = manufacture_rhs("1 - x^2", prob)
        assert any(abs(p[0]) < 1e-9 for p in rhs.singular_points)

    def test_zero_order_is_finite_at_a_zero_of_u(self, make_problem):
        prob = make_problem(alpha=-0.5, beta=1.0)
        rhs = manufacture_rhs("x + x^3/3", prob)
        assert math.isfinite(rhs.field(0.0))

    def test_two_dimensional_trace(self, make_problem):
        prob = make_problem(
            domain=make_rectangle((0.0, 0.0), (1.0, 1.0)), b="0", variant=OperatorVariant.TRACE
        )
        rhs = manufacture_rhs("x^2 + y^2", prob)
        # -4 + u
        assert rhs.field([0.5, 0.5]) == pytest.approx(-4.0 + 0.5)
