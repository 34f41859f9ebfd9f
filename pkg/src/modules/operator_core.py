"""
Degenerate Dirichlet Toolkit - Operator Core
Pointwise evaluation of F(p, M) = |p|^alpha * {M+, M-, tr}(M), the equation residual and
its radial reduction
"""

import logging
import math
from typing import Sequence, Tuple

import numpy as np

from src.core.errors import FieldEvalError, SingularGradient
from src.core.schemas import (
    EllipticityPair,
    ExponentProfile,
    GradientVector,
    OperatorVariant,
    ProblemSpec,
    SymMatrix,
    ZeroOrderTerm,
)

logger = logging.getLogger(__name__)


# ======================== EXTREMAL COMBINATIONS ========================


def extremal_combination(
    eigenvalues: Sequence[float], variant: OperatorVariant, pair: EllipticityPair
) -> float:
    """
    Apply the variant's combination to a spectrum

    M+ = A * sum(positive) + a * sum(negative)
    M- = a * sum(positive) + A * sum(negative)
    tr = sum
    """
    pos = sum(v for v in eigenvalues if v > 0)
    neg = sum(v for v in eigenvalues if v < 0)
    if variant == OperatorVariant.PUCCI_PLUS:
        return pair.A * pos + pair.a * neg
    if variant == OperatorVariant.PUCCI_MINUS:
        return pair.a * pos + pair.A * neg
    return pos + neg


def extremal_combination_array(
    values: np.ndarray, variant: OperatorVariant, pair: EllipticityPair
) -> np.ndarray:
    """Elementwise Phi(t) for a single eigenvalue surrogate t (vectorised)"""
    pos = np.maximum(values, 0.0)
    neg = np.minimum(values, 0.0)
    if variant == OperatorVariant.PUCCI_PLUS:
        return pair.A * pos + pair.a * neg
    if variant == OperatorVariant.PUCCI_MINUS:
        return pair.a * pos + pair.A * neg
    return values


def pucci_plus(M: SymMatrix, pair: EllipticityPair) -> float:
    return extremal_combination(M.eigenvalues(), OperatorVariant.PUCCI_PLUS, pair)


def pucci_minus(M: SymMatrix, pair: EllipticityPair) -> float:
    return extremal_combination(M.eigenvalues(), OperatorVariant.PUCCI_MINUS, pair)


def structure_pair(variant: OperatorVariant, pair: EllipticityPair) -> EllipticityPair:
    """Ellipticity constants the variant actually satisfies (the trace is (1, 1))"""
    if variant == OperatorVariant.TRACE:
        return EllipticityPair(a=1.0, A=1.0)
    return pair


# ======================== GRADIENT WEIGHT ========================


def gradient_weight(p: GradientVector, alpha: float) -> float:
    """
    Regularised |p|^alpha

    Args:
        p: gradient with regularisation eps
        alpha: gradient exponent

    Returns:
        (|p|^2 + eps^2)^(alpha/2)

    Raises:
        SingularGradient: eps = 0, p = 0 and alpha < 0
    """
    if alpha == 0:
        return 1.0
    mag = p.regularized_norm()
    if mag == 0.0:
        if alpha < 0:
            raise SingularGradient(f"|p| = 0 with eps = 0 and alpha = {alpha}")
        return 0.0
    return mag ** alpha


def operator_value(
    p: GradientVector,
    M: SymMatrix,
    variant: OperatorVariant,
    pair: EllipticityPair,
    alpha: float,
) -> float:
    """F(p, M) = gradient_weight(p, alpha) * {M+, M-, tr}(M)"""
    return gradient_weight(p, alpha) * extremal_combination(M.eigenvalues(), variant, pair)


# ======================== RESIDUAL ========================


def _field_at(field, x: Sequence[float]) -> float:
    point = np.atleast_1d(np.asarray(x, dtype=float)).reshape(1, -1)
    value = float(np.ravel(field(point))[0])
    if not math.isfinite(value):
        raise FieldEvalError(field.name, tuple(float(c) for c in point[0]))
    return value


def first_order_power(p: GradientVector, beta: float) -> float:
    """(|p|^2 + eps^2)^(beta/2); beta > 0 so always defined"""
    return p.regularized_norm() ** beta


def equation_residual_at_point(
    x: Sequence[float], u_val: float, p: GradientVector, M: SymMatrix, prob: ProblemSpec
) -> float:
    """
    -F(p, M) + b(x) |p|^beta + lambda |u|^alpha u - f(x)

    Value <= 0: the subsolution inequality holds at x; >= 0: the supersolution inequality.
    """
    exps = prob.exponents
    F = operator_value(p, M, prob.variant, prob.pair, exps.alpha)
    b = _field_at(prob.b_field, x)
    f = _field_at(prob.f_field, x)
    return -F + b * first_order_power(p, exps.beta) + prob.zero_order.gamma(u_val) - f


# ======================== RADIAL REDUCTION ========================


def radial_eigenvalues(r: float, v1: float, v2: float, N: int) -> Tuple[float, ...]:
    """Hessian spectrum of x -> v(|x|): v'' once and v'/r with multiplicity N - 1"""
    return (v2,) + (v1 / r,) * (N - 1)


def radial_operator_value(
    r: float,
    v: float,
    v1: float,
    v2: float,
    N: int,
    variant: OperatorVariant,
    pair: EllipticityPair,
    profile: ExponentProfile,
    eps: float = 0.0,
) -> float:
    """
    F for a radial profile v(r) with v' = v1, v'' = v2; only profile.alpha enters

    For v'' > 0 > v' the minus variant is |v'|^alpha (a v'' + A (N-1) v'/r).
    N = 1 drops the curvature term.
    """
    if r <= 0:
        raise ValueError("radial evaluation needs r > 0")
    weight = gradient_weight(GradientVector(components=(v1,), eps=eps), profile.alpha)
    return weight * extremal_combination(radial_eigenvalues(r, v1, v2, N), variant, pair)


def radial_residual(
    r: float,
    v: float,
    v1: float,
    v2: float,
    N: int,
    prob: ProblemSpec,
    b_value: float,
    f_value: float,
    eps: float = 0.0,
) -> float:
    """Full residual of a radial profile with radial coefficient values b(r), f(r)"""
    exps = prob.exponents
    F = radial_operator_value(r, v, v1, v2, N, prob.variant, prob.pair, exps, eps)
    grad = math.hypot(v1, eps)
    return -F + b_value * grad ** exps.beta + prob.zero_order.gamma(v) - f_value


def model_residual(
    grad_norm: np.ndarray,
    eigenvalues: np.ndarray,
    u_val: np.ndarray,
    alpha: float,
    beta: float,
    b_sup: float,
    zero_order: ZeroOrderTerm,
    variant: OperatorVariant,
    pair: EllipticityPair,
    side: str = "super",
) -> np.ndarray:
    """
    Vectorised residual of the sign-free model inequality used by barriers

    super: -|Du|^alpha F(D2u) - |b|inf |Du|^beta + gamma(u)
    sub:   -|Du|^alpha F(D2u) + |b|inf |Du|^beta + gamma(u)

    eigenvalues has shape (n, N). Where Du = 0 and D2u = 0 (locally constant pieces) the
    second-order term is dropped; Du = 0 with D2u != 0 and alpha < 0 gives nan.
    """
    eig = np.atleast_2d(eigenvalues)
    pos = np.where(eig > 0, eig, 0.0).sum(axis=1)
    neg = np.where(eig < 0, eig, 0.0).sum(axis=1)
    if variant == OperatorVariant.PUCCI_PLUS:
        F = pair.A * pos + pair.a * neg
    elif variant == OperatorVariant.PUCCI_MINUS:
        F = pair.a * pos + pair.A * neg
    else:
        F = pos + neg
    grad_norm = np.asarray(grad_norm, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        if alpha == 0:
            weight = np.ones_like(grad_norm)
        elif alpha > 0:
            weight = grad_norm ** alpha
        else:
            weight = np.where(grad_norm > 0, grad_norm ** alpha, np.nan)
        second = np.where(F == 0.0, 0.0, weight * F)
        first = b_sup * grad_norm ** beta
    sign = -1.0 if side == "super" else 1.0
    return -second + sign * first + zero_order.gamma(u_val)
