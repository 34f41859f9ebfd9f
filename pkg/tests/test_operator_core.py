import math

import numpy as np
import pytest

from src.core.errors import SingularGradient
from src.core.schemas import (
    EllipticityPair,
    ExponentProfile,
    GradientVector,
    OperatorVariant,
    SymMatrix,
    ZeroOrderTerm,
)
from src.modules.operator_core import (
    equation_residual_at_point,
    extremal_combination,
    gradient_weight,
    model_residual,
    operator_value,
    pucci_minus,
    pucci_plus,
    radial_operator_value,
    radial_residual,
    structure_pair,
)

PAIR = EllipticityPair(a=1.0, A=2.0)
UNIFORM = ExponentProfile(alpha=0.0, beta=1.0, lambda_=1.0)


def random_matrix(rng: np.random.Generator, dim: int = 2) -> SymMatrix:
    return SymMatrix.from_array(rng.normal(size=(dim, dim)))


class TestPucci:
    def test_diagonal_values(self):
        M = SymMatrix.diag(1.0, -2.0)
        assert pucci_plus(M, PAIR) == 0.0
        assert pucci_minus(M, PAIR) == -3.0
        assert extremal_combination(M.eigenvalues(), OperatorVariant.TRACE, PAIR) == -1.0

    def test_minus_is_dual_of_plus(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            M = random_matrix(rng)
            assert pucci_minus(M, PAIR) == pytest.approx(-pucci_plus(-M, PAIR), abs=1e-12)

    def test_ellipticity_bounds(self):
        """a tr(P) <= M(X + P) - M(X) <= A tr(P) for P >= 0"""
        rng = np.random.default_rng(1)
        for _ in range(500):
            X = random_matrix(rng)
            B = rng.normal(size=(2, 2))
            P = SymMatrix.from_array(B @ B.T)
            for op in (pucci_plus, pucci_minus):
                jump = op(X + P, PAIR) - op(X, PAIR)
                assert PAIR.a * P.trace() - 1e-10 <= jump <= PAIR.A * P.trace() + 1e-10

    def test_structure_pair_of_trace(self):
        assert structure_pair(OperatorVariant.TRACE, PAIR) == EllipticityPair(a=1.0, A=1.0)
        assert structure_pair(OperatorVariant.PUCCI_MINUS, PAIR) == PAIR


class TestOperatorValue:
    @pytest.mark.parametrize("alpha", [-0.5, 0.0, 1.5])
    def test_homogeneity(self, alpha):
        """F(t p, s M) = |t|^alpha s F(p, M) for s > 0"""
        rng = np.random.default_rng(2)
        for _ in range(2000):
            p = GradientVector(components=tuple(rng.normal(size=2)))
            M = random_matrix(rng)
            t = float(rng.uniform(-3, 3))
            s = float(rng.uniform(0.1, 3))
            for variant in OperatorVariant:
                base = operator_value(p, M, variant, PAIR, alpha)
                scaled = operator_value(p.scaled(t), M.scaled(s), variant, PAIR, alpha)
                assert scaled == pytest.approx(abs(t) ** alpha * s * base, rel=1e-9, abs=1e-9)

    def test_growth_bound(self):
        """|F(p, M)| <= A N |p|^alpha |M|"""
        rng = np.random.default_rng(3)
        for _ in range(2000):
            p = GradientVector(components=tuple(rng.normal(size=2)))
            M = random_matrix(rng)
            value = operator_value(p, M, OperatorVariant.PUCCI_PLUS, PAIR, 0.7)
            assert abs(value) <= PAIR.A * 2 * p.norm() ** 0.7 * M.spectral_norm() * (1 + 1e-12)

    def test_singular_gradient(self):
        p = GradientVector(components=(0.0,))
        with pytest.raises(SingularGradient):
            gradient_weight(p, -0.5)
        assert gradient_weight(p, 0.5) == 0.0
        assert gradient_weight(GradientVector(components=(0.0,), eps=0.25), -0.5) == pytest.approx(2.0)

    def test_equation_residual(self, make_problem):
        prob = make_problem()
        p = GradientVector(components=(1.0,))
        # u = x^2 at x = 0.5: -A u'' + b|u'| + u - f
        residual = equation_residual_at_point([0.5], 0.25, p, SymMatrix.diag(2.0), prob)
        assert residual == pytest.approx(-4.0 + 1.0 + 0.25 - 1.0)


class TestRadial:
    def test_minus_variant_expression(self):
        # v'' > 0 > v': a v'' + A (N-1) v'/r
        pair = EllipticityPair(a=1.0, A=1.5)
        value = radial_operator_value(1.0, 0.0, -1.0, 2.0, 2, OperatorVariant.PUCCI_MINUS, pair, UNIFORM)
        assert value == pytest.approx(1.0 * 2.0 + 1.5 * (-1.0))

    def test_one_dimension_drops_curvature(self):
        value = radial_operator_value(0.5, 0.0, -1.0, 2.0, 1, OperatorVariant.TRACE, PAIR, UNIFORM)
        assert value == 2.0

    def test_weight_multiplies(self):
        profile = ExponentProfile(alpha=1.0, beta=1.0, lambda_=1.0)
        value = radial_operator_value(1.0, 0.0, -2.0, 1.0, 1, OperatorVariant.TRACE, PAIR, profile)
        assert value == pytest.approx(2.0)

    def test_only_alpha_of_the_profile_enters(self):
        args = (0.7, 0.3, -1.2, 0.8, 3, OperatorVariant.PUCCI_PLUS, PAIR)
        base = radial_operator_value(*args, ExponentProfile(alpha=-0.5, beta=1.0, lambda_=1.0), 0.1)
        other = radial_operator_value(*args, ExponentProfile(alpha=-0.5, beta=1.5, lambda_=3.0), 0.1)
        assert base == other
        assert base != radial_operator_value(*args, ExponentProfile(alpha=0.5, beta=1.5, lambda_=3.0), 0.1)

    def test_origin_rejected(self):
        with pytest.raises(ValueError):
            radial_operator_value(0.0, 0.0, 0.0, 1.0, 2, OperatorVariant.TRACE, PAIR, UNIFORM)

    def test_radial_residual(self, make_problem):
        prob = make_problem(variant=OperatorVariant.TRACE)
        # v = r^2 in 2D: trace = 4
        value = radial_residual(0.5, 0.25, 1.0, 2.0, 2, prob, b_value=0.0, f_value=0.0)
        assert value == pytest.approx(-4.0 + 0.25)


class TestModelResidual:
    def test_locally_constant_piece_keeps_zero_order_only(self):
        gamma = ZeroOrderTerm(lambda_=2.0, alpha=-0.5)
        out = model_residual(
            np.array([0.0]), np.array([[0.0]]), np.array([4.0]), -0.5, 1.0, 1.0, gamma,
            OperatorVariant.PUCCI_PLUS, PAIR,
        )
        assert out[0] == pytest.approx(2.0 * 4.0 ** 0.5)

    def test_singular_point_is_undefined(self):
        gamma = ZeroOrderTerm(lambda_=1.0, alpha=-0.5)
        out = model_residual(
            np.array([0.0]), np.array([[1.0]]), np.array([0.0]), -0.5, 1.0, 1.0, gamma,
            OperatorVariant.PUCCI_PLUS, PAIR,
        )
        assert math.isnan(out[0])

    def test_sides_differ_by_first_order_sign(self):
        gamma = ZeroOrderTerm(lambda_=1.0, alpha=0.0)
        args = (np.array([2.0]), np.array([[-1.0]]), np.array([0.0]), 0.0, 1.0, 3.0, gamma, OperatorVariant.PUCCI_PLUS, PAIR)
        sup = model_residual(*args, side="super")
        sub = model_residual(*args, side="sub")
        assert sub[0] - sup[0] == pytest.approx(2 * 3.0 * 2.0)
