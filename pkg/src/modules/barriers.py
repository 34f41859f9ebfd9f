"""
Degenerate Dirichlet Toolkit - Barriers
Explicit certified super/subsolutions: the capped logarithmic global barrier, the
beta = alpha + 2 rescaling, the radial Hopf profile and the local boundary barrier
"""

import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from src.core.config import Config
from src.core.errors import (
    CriticalBeta,
    CrownOutsideDomain,
    DeltaTooLarge,
    HopfBarrierInfeasible,
    NonAffineBoundaryDatum,
)
from src.core.schemas import (
    BarrierConstants,
    BarrierSpec,
    Domain,
    DomainKind,
    HopfBarrier,
    HopfMode,
    OperatorVariant,
    ProblemSpec,
    Side,
    ZeroOrderTerm,
)
from src.modules.domains import (
    as_points,
    contains,
    domain_center,
    distance_arrays,
    extend,
    face_distance_arrays,
    inward_normal,
    points_at_distance,
    sample_points,
)
from src.modules.expressions import ScalarField, parse_expression
from src.modules.operator_core import model_residual, structure_pair

logger = logging.getLogger(__name__)


def _b_sup(prob: ProblemSpec) -> float:
    if prob.b_sup is not None:
        return prob.b_sup
    pts = sample_points(prob.domain, Config.domains.BOUNDEDNESS_SWEEP)
    return float(np.max(np.abs(np.atleast_1d(prob.b_field(pts)))))


def _branch(src: str, var: str, name: str) -> ScalarField:
    return ScalarField(parse_expression(src), (var,), name=name)


# ======================== CONSTANTS ========================


def kappa_minimum(lambda_: float, alpha: float, M_level: float, xtol: float = 1e-12) -> float:
    """Root of lambda * log(1 + kappa)^(1 + alpha) = M_level by bisection"""

    def gap(kappa: float) -> float:
        return lambda_ * math.log1p(kappa) ** (1.0 + alpha) - M_level

    hi = 1.0
    while gap(hi) <= 0:
        hi *= 2.0
    return optimize.bisect(gap, 0.0, hi, xtol=xtol)


def minimal_C(
    kappa: float,
    delta0: float,
    a: float,
    A: float,
    N: int,
    C1: float,
    b_sup: float,
    M_level: float,
    alpha: float,
    beta: float,
) -> Dict[str, float]:
    """
    Lower bounds on C, one per inequality the log branch must satisfy

    collar:      C > 2 kappa / delta0
    curvature:   a C / (2(1 + 2 kappa)) >= A N C1
    first_order: (a/2)(C/(1 + 2 kappa))^(2 + alpha - beta) > 2|b|inf
    level:       a C^(2 + alpha) / (4 (1 + 2 kappa)^(2 + alpha)) > M

    Raises:
        CriticalBeta: beta = alpha + 2 with |b|inf > a/4
    """
    k = 1.0 + 2.0 * kappa
    bounds = {
        "collar": 2.0 * kappa / delta0,
        "curvature": 2.0 * k * A * N * C1 / a,
        "level": k * (4.0 * M_level / a) ** (1.0 / (2.0 + alpha)),
    }
    gap = 2.0 + alpha - beta
    if gap <= 1e-12:
        if b_sup > a / 4.0 * (1.0 + 1e-12):
            raise CriticalBeta(
                f"beta = alpha + 2 with |b|inf={b_sup} > a/4={a / 4.0}; use the rescaled barrier"
            )
        bounds["first_order"] = 0.0
    else:
        bounds["first_order"] = k * (4.0 * b_sup / a) ** (1.0 / gap) if b_sup > 0 else 0.0
    return bounds


def barrier_constants(
    prob: ProblemSpec,
    M_level: float,
    b_sup: Optional[float] = None,
    config: Config = Config(),
) -> BarrierConstants:
    """
    Certified constants (kappa, C) for the global barrier

    Args:
        prob: validated problem (lambda > 0)
        M_level: level the supersolution must reach
        b_sup: override for |b|inf (used by the rescaled problem)

    Returns:
        BarrierConstants with kappa = safety * kappa_min and C = safety * max(bounds)
    """
    safety = config.barriers.SAFETY
    exps = prob.exponents
    pair = structure_pair(prob.variant, prob.pair)
    dom = prob.domain
    b = _b_sup(prob) if b_sup is None else b_sup
    kappa_min = kappa_minimum(exps.lambda_, exps.alpha, M_level, config.tolerances.BISECTION_XTOL)
    kappa = safety * kappa_min
    bounds = minimal_C(
        kappa,
        dom.collar_width,
        pair.a,
        pair.A,
        dom.dim,
        dom.hess_dist_bound,
        b,
        M_level,
        exps.alpha,
        exps.beta,
    )
    C = safety * max(bounds.values())
    logger.debug(f"barrier constants: kappa={kappa:.6g} C={C:.6g} bounds={bounds}")
    return BarrierConstants(
        kappa=kappa,
        C=C,
        delta0_eff=dom.collar_width,
        M_level=M_level,
        safety=safety,
        kappa_min=kappa_min,
        C_bounds=bounds,
    )


# ======================== EVALUATION ========================


def _branch_jet(field: ScalarField, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    return (
        np.atleast_1d(field(t)),
        field.gradient(t).reshape(-1),
        field.hessian(t).reshape(-1),
    )


def evaluate_barrier(
    spec: BarrierSpec, x
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Value, gradient and Hessian of a barrier by the exact chain rule

    Returns:
        values (n,), gradients (n, dim), Hessians (n, dim, dim)
    """
    dom = spec.domain
    pts = as_points(dom, x)
    n, dim = pts.shape
    if spec.kind == "boundary":
        d, grad_d, hess_d = face_distance_arrays(dom, spec.anchor, pts)
    else:
        d, grad_d, hess_d = extend(dom, *distance_arrays(dom, pts))
    d = np.maximum(d, 0.0)

    g, g1, g2 = _branch_jet(spec.log_branch, d)
    outer = grad_d[:, :, None] * grad_d[:, None, :]
    value = g.copy()
    grad = g1[:, None] * grad_d
    hess = g1[:, None, None] * hess_d + g2[:, None, None] * outer
    if spec.cap_value is not None:
        active = g < spec.cap_value
        value = np.where(active, value, spec.cap_value)
        grad = np.where(active[:, None], grad, 0.0)
        hess = np.where(active[:, None, None], hess, 0.0)

    if spec.cubic_branch is not None:
        rel = pts - np.asarray(spec.anchor)
        rho = np.linalg.norm(rel, axis=1)
        s = rho - spec.inner_radius
        on = s > 0
        c, c1, c2 = _branch_jet(spec.cubic_branch, np.where(on, s, 0.0))
        safe = np.where(rho > 0, rho, 1.0)
        unit = rel / safe[:, None]
        proj = np.eye(dim)[None, :, :] - unit[:, :, None] * unit[:, None, :]
        value = value + np.where(on, c, 0.0)
        grad = grad + np.where(on, c1, 0.0)[:, None] * unit
        hess = hess + np.where(on, 1.0, 0.0)[:, None, None] * (
            c2[:, None, None] * unit[:, :, None] * unit[:, None, :]
            + (c1 / safe)[:, None, None] * proj
        )

    if spec.affine_part is not None:
        coef = np.asarray(spec.affine_part[1:])
        value = value + spec.affine_part[0] + pts @ coef
        grad = grad + coef[None, :]

    factor = spec.sign * spec.scale
    return factor * value, factor * grad, factor * hess


def barrier_residual(
    spec: BarrierSpec,
    prob: ProblemSpec,
    x,
    b_sup: Optional[float] = None,
    with_zero_order: bool = True,
) -> np.ndarray:
    """
    Residual of the sign-free model inequality at x

    Super side: -|Dw|^alpha M+(D2w) - |b|inf |Dw|^beta + gamma(w), to be >= level.
    Sub side:   -|Dw|^alpha M-(D2w) + |b|inf |Dw|^beta + gamma(w), to be <= -level.
    M+/M- are taken with the variant's structure constants, which bound every variant.
    """
    values, grads, hess = evaluate_barrier(spec, x)
    pair = structure_pair(prob.variant, prob.pair)
    exps = prob.exponents
    eig = np.linalg.eigvalsh(hess)
    zero_order = prob.zero_order if with_zero_order else ZeroOrderTerm(lambda_=0.0, alpha=exps.alpha)
    variant = OperatorVariant.PUCCI_PLUS if spec.side == Side.SUPER else OperatorVariant.PUCCI_MINUS
    return model_residual(
        np.linalg.norm(grads, axis=1),
        eig,
        values,
        exps.alpha,
        exps.beta,
        _b_sup(prob) if b_sup is None else b_sup,
        zero_order,
        variant,
        pair,
        side=spec.side.value,
    )


def _oriented(residual: np.ndarray, side: Side) -> np.ndarray:
    return residual if side == Side.SUPER else -residual


# ======================== GLOBAL BARRIER ========================


def _certify_global(
    spec: BarrierSpec, prob: ProblemSpec, level: float, config: Config
) -> BarrierSpec:
    n = config.barriers.SWEEP_POINTS
    consts = spec.constants
    interface = consts.kappa / consts.C
    d_log = np.linspace(0.0, interface, n, endpoint=False)
    d_cap = np.linspace(interface, prob.domain.inradius, n)
    margins: Dict[str, float] = {}
    for name, d_values in (("log_branch", d_log), ("cap_branch", d_cap)):
        res = _oriented(barrier_residual(spec, prob, points_at_distance(prob.domain, d_values)), spec.side)
        margins[name] = float(np.nanmin(res)) if np.isfinite(res).any() else float("nan")
    min_res = min(margins.values())
    certified = bool(min_res >= config.barriers.CERTIFY_MARGIN * level)
    if not certified:
        logger.warning(f"global barrier residual {min_res:.6g} below 0.9 * level {level:.6g}")
    return spec.model_copy(update={"margins": margins, "min_residual": min_res, "certified": certified})


def global_barrier(
    prob: ProblemSpec,
    M_level: float,
    side: Side = Side.SUPER,
    config: Config = Config(),
) -> BarrierSpec:
    """
    phi = min(log(1 + C d), log(1 + kappa)); the subsolution is -phi

    Raises:
        CriticalBeta: beta = alpha + 2 with |b|inf > a/4
    """
    consts = barrier_constants(prob, M_level, config=config)
    spec = BarrierSpec(
        kind="global",
        side=side,
        domain=prob.domain,
        log_branch=_branch(f"log(1 + {consts.C!r}*d)", "d", "log_branch"),
        cap_value=math.log1p(consts.kappa),
        constants=consts,
    )
    return _certify_global(spec, prob, M_level, config)


def critical_beta_rescale(
    prob: ProblemSpec,
    M_level: float,
    side: Side = Side.SUPER,
    config: Config = Config(),
) -> Tuple[float, BarrierSpec]:
    """
    beta = alpha + 2: build phi for first-order bound a/4 at level M eps^-(1+alpha) and
    return psi = eps * phi with eps = a / (4 |b|inf)

    The second-order and zero-order terms are homogeneous of degree 1 + alpha and the
    first-order term of degree alpha + 2, so psi reaches level M for the original |b|inf.
    """
    b = _b_sup(prob)
    if b == 0.0:
        return 1.0, global_barrier(prob, M_level, side, config)
    a = structure_pair(prob.variant, prob.pair).a
    eps = a / (4.0 * b)
    alpha = prob.exponents.alpha
    scaled_level = M_level * eps ** (-(1.0 + alpha))
    consts = barrier_constants(prob, scaled_level, b_sup=a / 4.0, config=config)
    spec = BarrierSpec(
        kind="global",
        side=side,
        domain=prob.domain,
        log_branch=_branch(f"log(1 + {consts.C!r}*d)", "d", "log_branch"),
        cap_value=math.log1p(consts.kappa),
        constants=consts,
        scale=eps,
        rescale_eps=eps,
    )
    return eps, _certify_global(spec, prob, M_level, config)


def certified_barrier(
    prob: ProblemSpec, M_level: float, side: Side = Side.SUPER, config: Config = Config()
) -> BarrierSpec:
    """Global barrier, falling back to the rescaled construction when beta = alpha + 2"""
    try:
        return global_barrier(prob, M_level, side, config)
    except CriticalBeta:
        return critical_beta_rescale(prob, M_level, side, config)[1]


# ======================== HOPF BARRIER ========================


def hopf_residual(hb: HopfBarrier, prob: ProblemSpec, r: np.ndarray, b_sup: Optional[float] = None) -> np.ndarray:
    """-|v'|^alpha M-(D2v) + |b|inf |v'|^beta for the radial profile, negative when certified"""
    r = np.asarray(r, dtype=float)
    pair = structure_pair(prob.variant, prob.pair)
    exps = prob.exponents
    decay = hb.delta * hb.c * np.exp(-hb.c * r)
    v1 = -decay
    v2 = hb.c * decay
    curvature = (hb.dim - 1) * v1 / r
    # v'' > 0 > v': M- = a v'' + A (N-1) v'/r
    m_minus = pair.a * v2 + pair.A * curvature
    b = _b_sup(prob) if b_sup is None else b_sup
    return -(decay ** exps.alpha) * m_minus + b * decay ** exps.beta


def hopf_barrier(
    dom: Domain,
    prob: ProblemSpec,
    delta_cap: float,
    center: Optional[Sequence[float]] = None,
    radius: Optional[float] = None,
    mode: HopfMode = HopfMode.INTERIOR,
    config: Config = Config(),
) -> HopfBarrier:
    """
    Radial subsolution v(r) = delta (exp(-c r) - exp(-c R))

    Interior mode lives on the crown B(x0, 2R) minus B(x0, R/2); boundary mode on
    B(x0, R) minus B(x0, R/2) with B(x0, R) touching the boundary.

    Raises:
        CrownOutsideDomain: the annulus leaves the domain
        HopfBarrierInfeasible: no certified (c, delta) after adjustment
    """
    safety = config.barriers.SAFETY
    pair = structure_pair(prob.variant, prob.pair)
    exps = prob.exponents
    N = dom.dim
    x0 = np.asarray(center if center is not None else domain_center(dom), dtype=float)
    R = float(radius if radius is not None else 0.5 * dom.inradius)
    outer = 2.0 * R if mode == HopfMode.INTERIOR else R
    room = float(distance_arrays(dom, x0)[0][0]) if _inside(dom, x0) else -1.0
    if room < outer - 1e-12:
        raise CrownOutsideDomain(f"annulus of radius {outer} around {x0.tolist()} leaves the domain")

    b = _b_sup(prob)
    gap = 2.0 + exps.alpha - exps.beta
    c_bounds = [2.0 * (N - 1) * pair.A / (R * pair.a), 1.0 / R]
    delta = min(delta_cap, 1.0 / safety)
    if gap > 1e-12:
        if b > 0:
            c_bounds.append((2.0 * b / pair.a) ** (1.0 / gap))
    elif b > 0:
        delta = min(delta, pair.a / (2.0 * b) / safety)
    c = safety * max(c_bounds)

    r = np.linspace(0.5 * R, outer, config.barriers.SWEEP_POINTS)
    hb = HopfBarrier(
        center=tuple(x0.tolist()),
        R=R,
        inner_radius=0.5 * R,
        outer_radius=outer,
        delta=delta,
        c=c,
        mode=mode,
        dim=N,
    )
    for step in range(config.barriers.HOPF_ADJUST_STEPS):
        worst = float(np.max(hopf_residual(hb, prob, r, b)))
        if worst < 0:
            logger.debug(f"hopf barrier certified after {step} adjustment(s): c={hb.c:.6g}")
            return hb.model_copy(update={"certified": True, "max_residual": worst})
        hb = hb.model_copy(update={"c": hb.c * 1.25})
    raise HopfBarrierInfeasible(f"no certified Hopf profile (last max residual {worst:.3g})")


def _inside(dom: Domain, x0: np.ndarray) -> bool:
    return bool(contains(dom, as_points(dom, x0))[0])


# ======================== BOUNDARY BARRIER ========================


def _affine_datum(prob: ProblemSpec, anchor: np.ndarray) -> Tuple[float, ...]:
    pts = sample_points(prob.domain, 257)
    hess = prob.phi_field.hessian(pts)
    if np.max(np.abs(hess)) > 1e-10:
        raise NonAffineBoundaryDatum(f"boundary datum '{prob.phi_field}' is not affine")
    slope = np.atleast_1d(prob.phi_field.gradient(anchor if prob.dim > 1 else float(anchor[0])))
    c0 = float(prob.phi_field(anchor if prob.dim > 1 else float(anchor[0]))) - float(slope @ anchor)
    return (c0,) + tuple(float(s) for s in slope)


def _collar_samples(dom: Domain, anchor: np.ndarray, delta: float, n: int) -> np.ndarray:
    """Points of the domain within distance delta of the anchor's face and within 1 of the anchor"""
    normal = inward_normal(dom, anchor)
    d_values = np.linspace(0.0, delta, n, endpoint=False)
    if dom.dim == 1:
        return (anchor + d_values[:, None] * normal[None, :]).reshape(-1, 1)
    m = max(4, int(math.sqrt(n)))
    tangent = np.array([-normal[1], normal[0]])
    D, T = np.meshgrid(np.linspace(0.0, delta, m, endpoint=False), np.linspace(-1.0, 1.0, m), indexing="ij")
    if dom.kind == DomainKind.BALL:
        c = np.asarray(dom.center)
        theta0 = math.atan2(anchor[1] - c[1], anchor[0] - c[0])
        theta = theta0 + T.ravel() / dom.radius
        rho = dom.radius - D.ravel()
        pts = np.column_stack([c[0] + rho * np.cos(theta), c[1] + rho * np.sin(theta)])
    else:
        pts = anchor + D.ravel()[:, None] * normal + T.ravel()[:, None] * tangent
    keep = contains(dom, pts) & (np.linalg.norm(pts - anchor, axis=1) <= 1.0)
    return pts[keep]


def boundary_barrier(
    prob: ProblemSpec,
    r: float,
    delta: float,
    anchor: Sequence[float],
    u_bound: float = 1.0,
    config: Config = Config(),
) -> BarrierSpec:
    """
    w = log(1 + C d) + (|x - x0| - r)^3/(1 - r)^3 [for |x - x0| >= r] + affine datum

    d is the distance to the boundary piece through the anchor x0, C = 2/delta. The
    barrier is certified on the collar {d < delta} inside the unit ball around x0 for
    the level |f|inf + lambda u_bound^(1+alpha). beta = alpha + 2 uses the scaling
    eps = a 2^(beta - 2 alpha - 4)/|b|inf.

    Raises:
        DeltaTooLarge: delta >= (1 - r)/9
        NonAffineBoundaryDatum: phi has a nonzero Hessian
    """
    if not 0 < r < 1:
        raise ValueError(f"r={r} must lie in (0, 1)")
    if not 0 < delta < (1.0 - r) / 9.0:
        raise DeltaTooLarge(f"delta={delta} must be below (1 - r)/9 = {(1.0 - r) / 9.0}")
    dom = prob.domain
    x0 = np.asarray(anchor, dtype=float).reshape(-1)
    affine = _affine_datum(prob, x0)
    exps = prob.exponents
    pair = structure_pair(prob.variant, prob.pair)
    b = _b_sup(prob)
    f_sup = prob.f_sup if prob.f_sup is not None else 0.0
    level = f_sup + exps.lambda_ * u_bound ** (1.0 + exps.alpha)

    scale = 1.0
    if exps.critical and b > 0:
        scale = pair.a * 2.0 ** (exps.beta - 2.0 * exps.alpha - 4.0) / b

    C = 2.0 / delta
    homogeneous = BarrierSpec(
        kind="boundary",
        side=Side.SUPER,
        domain=dom,
        log_branch=_branch(f"log(1 + {C!r}*d)", "d", "log_branch"),
        cubic_branch=_branch(f"s^3/{(1.0 - r) ** 3!r}", "s", "cubic_branch"),
        inner_radius=r,
        anchor=tuple(x0.tolist()),
        scale=scale,
        rescale_eps=scale if scale != 1.0 else None,
    )
    # scale multiplies the whole function, the datum must come out unscaled
    spec = homogeneous.model_copy(update={"affine_part": tuple(v / scale for v in affine)})

    pts = _collar_samples(dom, x0, delta, config.barriers.SWEEP_POINTS)
    min_res = float(np.nanmin(barrier_residual(spec, prob, pts, with_zero_order=False)))

    margins = _dominance_margins(homogeneous, dom, x0, delta, u_bound)
    _, grads, _ = evaluate_barrier(homogeneous, pts)
    margins["gradient"] = float(np.min(np.linalg.norm(grads, axis=1)) / scale - 1.0 / (3.0 * delta))
    margins["residual"] = min_res - level
    dominance = [v for k, v in margins.items() if k in ("collar_edge", "sphere", "flat")]
    certified = bool(min_res >= level and all(v >= -1e-12 for v in dominance))
    logger.debug(f"boundary barrier delta={delta:.4g}: residual {min_res:.4g} vs level {level:.4g}")
    return spec.model_copy(update={"min_residual": min_res, "certified": certified, "margins": margins})


def _dominance_margins(
    spec: BarrierSpec, dom: Domain, x0: np.ndarray, delta: float, u_bound: float
) -> Dict[str, float]:
    """w - u_bound on {d = delta} and on {|x - x0| = 1, d < delta}; w on the flat piece"""
    margins: Dict[str, float] = {}
    normal = inward_normal(dom, x0)
    if dom.dim == 1:
        edge = x0 + delta * normal
        margins["collar_edge"] = float(evaluate_barrier(spec, edge)[0][0] - u_bound)
        margins["flat"] = float(evaluate_barrier(spec, x0)[0][0])
        return margins
    tangent = np.array([-normal[1], normal[0]])
    t = np.linspace(-1.0, 1.0, 201)
    def restricted(points: np.ndarray) -> np.ndarray:
        keep = contains(dom, points) & (np.linalg.norm(points - x0, axis=1) <= 1.0 + 1e-12)
        return points[keep]

    if dom.kind == DomainKind.BALL:
        c = np.asarray(dom.center)
        theta0 = math.atan2(x0[1] - c[1], x0[0] - c[0])

        def at(dist: float, tt: np.ndarray) -> np.ndarray:
            rho = dom.radius - dist
            th = theta0 + tt / dom.radius
            return np.column_stack([c[0] + rho * np.cos(th), c[1] + rho * np.sin(th)])
    else:

        def at(dist: float, tt: np.ndarray) -> np.ndarray:
            return x0 + dist * normal + tt[:, None] * tangent

    edge = restricted(at(delta, t))
    flat = restricted(at(0.0, t))
    if len(edge):
        margins["collar_edge"] = float(np.min(evaluate_barrier(spec, edge)[0]) - u_bound)
    if len(flat):
        margins["flat"] = float(np.min(evaluate_barrier(spec, flat)[0]))
    theta = np.linspace(0.0, 2.0 * math.pi, 721)
    sphere = x0 + np.column_stack([np.cos(theta), np.sin(theta)])
    sphere = sphere[contains(dom, sphere)]
    if len(sphere):
        d, _, _ = face_distance_arrays(dom, x0, sphere)
        sphere = sphere[d < delta]
        if len(sphere):
            margins["sphere"] = float(np.min(evaluate_barrier(spec, sphere)[0]) - u_bound)
    return margins


def admissible_delta(
    prob: ProblemSpec,
    r: float,
    anchor: Sequence[float],
    u_bound: float = 1.0,
    delta: Optional[float] = None,
    config: Config = Config(),
) -> BarrierSpec:
    """Halve delta from just below (1 - r)/9 until the boundary barrier certifies"""
    delta = 0.99 * (1.0 - r) / 9.0 if delta is None else delta
    for _ in range(config.barriers.HOPF_ADJUST_STEPS):
        spec = boundary_barrier(prob, r, delta, anchor, u_bound, config)
        if spec.certified:
            return spec
        delta *= 0.5
    raise DeltaTooLarge(f"no admissible delta down to {delta:.3g}")


# ======================== DUMP ========================


def barrier_table(
    spec: BarrierSpec, prob: ProblemSpec, n: Optional[int] = None
) -> Tuple[List[str], List[List[float]]]:
    """Sampled (x[, y], value, residual) rows for plotting"""
    n = n or Config.barriers.SWEEP_POINTS
    if spec.kind == "boundary":
        pts = _collar_samples(prob.domain, np.asarray(spec.anchor), 0.99 * (1.0 - spec.inner_radius) / 9.0, n)
    else:
        pts = sample_points(prob.domain, n)
    values, _, _ = evaluate_barrier(spec, pts)
    residual = barrier_residual(spec, prob, pts, with_zero_order=spec.kind != "boundary")
    header = list(prob.domain.variables) + ["value", "residual"]
    rows = [list(p) + [float(v), float(q)] for p, v, q in zip(pts.tolist(), values, residual)]
    return header, rows
