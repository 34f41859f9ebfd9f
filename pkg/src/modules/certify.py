"""
Degenerate Dirichlet Toolkit - Certification
Numerical checks of the viscosity, comparison, regularity, positivity and Hopf properties
on closed-form candidates and computed grid functions
"""

import logging
import math
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from src.core.config import Config
from src.core.errors import (
    BoundaryOrderViolated,
    CrownOutsideDomain,
    DirichletError,
    ExponentOutOfRange,
    HopfBarrierInfeasible,
    NotStrictMinimum,
    QTooSmall,
    SignViolation,
)
from src.core.schemas import (
    BarrierSpec,
    CertificateRecord,
    ComparisonReport,
    EllipticityPair,
    ExponentProfile,
    GridFunction,
    HopfMode,
    ModulusFit,
    ModulusForm,
    OperatorVariant,
    PointClass,
    ProblemSpec,
    SandwichResult,
    SchemeParams,
    Side,
    StrongMaxResult,
    ViscosityRecord,
    ViscosityReport,
    ZeroGradientResult,
)
from src.core.utils import instance_hash
from src.modules.barriers import barrier_residual, evaluate_barrier, hopf_barrier
from src.modules.domains import (
    as_points,
    build_grid,
    cartesian_nodes,
    contains,
    domain_center,
    make_interval,
    points_at_distance,
    validate_problem,
)
from src.modules.expressions import ScalarField
from src.modules.operator_core import extremal_combination_array
from src.modules.scheme import monotonicity_probe, solve

logger = logging.getLogger(__name__)


# ======================== POINTWISE VISCOSITY CHECK ========================


def _neighbourhood(dom, x: np.ndarray, radius: float) -> np.ndarray:
    """Sample ring of points around x inside the closure"""
    dim = x.shape[0]
    radii = radius * np.array([1.0 / 3.0, 2.0 / 3.0, 1.0])
    if dim == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        angles = np.linspace(0.0, 2.0 * math.pi, 8, endpoint=False)
        dirs = np.column_stack([np.cos(angles), np.sin(angles)])
    pts = (x[None, None, :] + radii[:, None, None] * dirs[None, :, :]).reshape(-1, dim)
    return pts[contains(dom, pts)]


def _equation_residual(
    u: ScalarField, prob: ProblemSpec, pts: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Residual, gradient norm and u values with u's own derivatives"""
    exps = prob.exponents
    vals = np.atleast_1d(u(pts))
    grads = np.asarray(u.gradient(pts)).reshape(len(pts), -1)
    hess = np.asarray(u.hessian(pts)).reshape(len(pts), prob.dim, prob.dim)
    gnorm = np.linalg.norm(grads, axis=1)
    eig = np.linalg.eigvalsh(hess)
    F = extremal_combination_array(eig, prob.variant, prob.pair).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        if exps.alpha == 0:
            weight = np.ones_like(gnorm)
        else:
            weight = np.where(gnorm > 0, gnorm ** exps.alpha, 0.0 if exps.alpha > 0 else np.inf)
        second = np.where(F == 0.0, 0.0, weight * F)
    b = np.atleast_1d(prob.b_field.checked(pts))
    f = np.atleast_1d(prob.f_field.checked(pts))
    res = -second + b * gnorm ** exps.beta + prob.zero_order.gamma(vals) - f
    return res, gnorm, vals


def classical_check(
    u: Union[ScalarField, BarrierSpec],
    prob: ProblemSpec,
    sample_points,
    side: Side = Side.SUPER,
    h: float = 1e-2,
    tol: float = 1e-9,
    config: Config = Config(),
) -> ViscosityReport:
    """
    Check the sub/supersolution inequality at sample points

    Classical points (|Du| > 0) use u's own derivatives. Points where u is flat on a 3h
    neighbourhood use the locally-constant rule gamma(u) - f >= 0 (super) / <= 0 (sub).
    Remaining zero-gradient points: the residual itself for alpha >= 0, the zero-gradient
    criterion gamma(u) vs f for alpha < 0.

    A BarrierSpec is checked against the sign-free model inequality with |b|inf; its
    margins are the oriented model residuals.
    """
    pts = as_points(prob.domain, sample_points)
    sign = 1.0 if side == Side.SUPER else -1.0
    report = ViscosityReport(side=side)

    if isinstance(u, BarrierSpec):
        margins = sign * barrier_residual(u, prob, pts)
        for x, m in zip(pts, margins):
            report.records.append(
                ViscosityRecord(
                    point=tuple(float(c) for c in x),
                    classification=PointClass.CLASSICAL,
                    margin=float(m),
                    side=side,
                    passed=bool(m >= -tol),
                )
            )
        return report

    res, gnorm, vals = _equation_residual(u, prob, pts)
    flat_tol = config.tolerances.LOCALLY_CONSTANT
    radius = config.certify.NEIGHBOURHOOD_FACTOR * h
    alpha = prob.exponents.alpha
    for k, x in enumerate(pts):
        if gnorm[k] > config.tolerances.KINK_TOL:
            cls = PointClass.CLASSICAL
            margin = sign * res[k]
        else:
            near = _neighbourhood(prob.domain, x, radius)
            near_grad = np.abs(np.asarray(u.gradient(near))).max(initial=0.0)
            near_hess = np.abs(np.asarray(u.hessian(near))).max(initial=0.0)
            zero_order = prob.zero_order.gamma(vals[k]) - float(np.atleast_1d(prob.f_field(x[None, :]))[0])
            if near_grad <= flat_tol and near_hess <= flat_tol:
                cls = PointClass.LOCALLY_CONSTANT
                margin = sign * zero_order
            else:
                cls = PointClass.ZERO_GRADIENT
                margin = sign * (zero_order if alpha < 0 else res[k])
        report.records.append(
            ViscosityRecord(
                point=tuple(float(c) for c in x),
                classification=cls,
                margin=float(margin),
                side=side,
                passed=bool(margin >= -tol),
            )
        )
    logger.debug(
        f"classical_check {side.value}: {len(report.records)} points, min margin {report.min_margin:.3g}"
    )
    return report


def zero_gradient_check(
    v: ScalarField,
    prob: ProblemSpec,
    x_bar: Sequence[float],
    q: float,
    C: float,
    radius: Optional[float] = None,
    config: Config = Config(),
) -> ZeroGradientResult:
    """
    Singular-case test at a strict minimum of v(x) + C|x - x_bar|^q

    A supersolution must satisfy f(x_bar) <= gamma(v(x_bar)) there; margin is
    gamma(v(x_bar)) - f(x_bar).

    Raises:
        ExponentOutOfRange: alpha not in (-1, 0)
        QTooSmall: q < (alpha + 2)/(alpha + 1)
        NotStrictMinimum: some ring sample is not above the centre value
    """
    alpha = prob.exponents.alpha
    if not -1.0 < alpha < 0.0:
        raise ExponentOutOfRange("alpha", alpha, "(-1, 0)")
    q_min = (alpha + 2.0) / (alpha + 1.0)
    if q < q_min - config.tolerances.ROUNDOFF:
        raise QTooSmall(q, q_min)

    x0 = as_points(prob.domain, x_bar)[0]
    rho = 0.1 * prob.domain.inradius if radius is None else radius
    rings = config.certify.STRICT_MIN_RINGS
    centre = float(np.atleast_1d(v(x0[None, :]))[0])
    for k in range(1, rings + 1):
        ring = _neighbourhood(prob.domain, x0, rho * k / rings)
        if ring.size == 0:
            continue
        dist = np.linalg.norm(ring - x0, axis=1)
        w = np.atleast_1d(v(ring)) + C * dist ** q
        if np.any(w <= centre):
            raise NotStrictMinimum(f"v + C|x - x_bar|^{q} not above {centre:.6g} at radius {rho * k / rings:.3g}")

    margin = float(prob.zero_order.gamma(centre) - np.atleast_1d(prob.f_field(x0[None, :]))[0])
    return ZeroGradientResult(passed=margin >= 0.0, margin=margin, q=q, q_min=q_min)


# ======================== COMPARISON ========================


def comparison_hypothesis(prob_sub: ProblemSpec, prob_super: ProblemSpec, grid) -> Optional[str]:
    """strict_gap when g < f at every node, increasing_gamma when g <= f and lambda > 0"""
    pts = cartesian_nodes(grid)
    gap = np.atleast_1d(prob_super.f_field(pts)) - np.atleast_1d(prob_sub.f_field(pts))
    if np.all(gap > 0):
        return "strict_gap"
    if np.all(gap >= 0) and prob_super.exponents.lambda_ > 0:
        return "increasing_gamma"
    return None


def comparison_probe(
    u_h: GridFunction,
    v_h: GridFunction,
    tolerance: float = 1e-7,
    hypothesis: Optional[str] = None,
    config: Config = Config(),
) -> ComparisonReport:
    """
    max over interior nodes of u_h - v_h

    Raises:
        BoundaryOrderViolated: u_h > v_h at a boundary node
    """
    grid = u_h.grid
    diff = u_h.values - v_h.values
    edge = diff[grid.boundary]
    if edge.size and float(np.max(edge)) > config.tolerances.BOUNDARY_ORDER:
        node = int(grid.boundary[int(np.argmax(edge))])
        raise BoundaryOrderViolated(f"u_h - v_h = {float(np.max(edge)):.3e} at boundary node {node}")
    inner = diff[grid.interior]
    k = int(np.argmax(inner))
    node = int(grid.interior[k])
    margin = float(inner[k])
    return ComparisonReport(
        margin=margin,
        node=node,
        point=tuple(float(c) for c in cartesian_nodes(grid)[node]),
        tolerance=tolerance,
        passed=margin <= tolerance,
        hypothesis=hypothesis,
    )


# ======================== MODULUS OF CONTINUITY ========================


def omega_modulus(s: np.ndarray, tau: float) -> np.ndarray:
    """s - s^(1+tau)/(2(1+tau)), constant beyond s0 = (1+tau)^(1/tau)"""
    s0 = (1.0 + tau) ** (1.0 / tau)
    t = np.minimum(np.asarray(s, dtype=float), s0)
    return t - t ** (1.0 + tau) / (2.0 * (1.0 + tau))


def _modulus(form: ModulusForm, s: np.ndarray, exponent: float) -> np.ndarray:
    if form == ModulusForm.LIPSCHITZ:
        return s
    if form == ModulusForm.HOLDER:
        return s ** exponent
    return omega_modulus(s, exponent)


def _region_nodes(u_h: GridFunction, r: float, region: str, anchor) -> Tuple[np.ndarray, np.ndarray]:
    grid = u_h.grid
    dom = grid.domain
    pts = grid.coords if grid.radial else cartesian_nodes(grid)
    if region == "boundary":
        if anchor is None:
            anchor = pts[grid.boundary[0]]
        centre = np.asarray(anchor, dtype=float).reshape(-1)
        if grid.radial and centre.size > 1:
            centre = np.array([dom.radius])
        mask = np.linalg.norm(pts - centre, axis=1) <= r + 1e-12
    else:
        centre = np.zeros(1) if grid.radial else np.asarray(domain_center(dom))
        mask = np.linalg.norm(pts - centre, axis=1) <= r * dom.inradius + 1e-12
    idx = np.flatnonzero(mask)
    return idx, pts[idx]


def modulus_fit(
    u_h: GridFunction,
    r: float,
    form: ModulusForm = ModulusForm.LIPSCHITZ,
    exponent: Optional[float] = None,
    region: str = "interior",
    anchor: Optional[Sequence[float]] = None,
    seed: int = 0,
    config: Config = Config(),
) -> ModulusFit:
    """
    Least constant K with |u(x) - u(y)| <= K w(|x - y|) over node pairs of a subregion

    interior: nodes within r * inradius of the centre; boundary: nodes within r of a
    boundary anchor. Exhaustive over pairs up to the node cutoff, uniformly sampled beyond.
    """
    if exponent is None:
        exponent = 0.5
    idx, pts = _region_nodes(u_h, r, region, anchor)
    vals = u_h.values[idx]
    n = idx.size
    best, pair = 0.0, (0, 0)
    n_pairs = 0
    exhaustive = n <= config.certify.EXHAUSTIVE_PAIR_CUTOFF

    def scan(i: np.ndarray, j: np.ndarray) -> None:
        nonlocal best, pair, n_pairs
        s = np.linalg.norm(pts[i] - pts[j], axis=1)
        keep = s > 0
        i, j, s = i[keep], j[keep], s[keep]
        n_pairs += int(s.size)
        if s.size == 0:
            return
        ratio = np.abs(vals[i] - vals[j]) / _modulus(form, s, exponent)
        k = int(np.argmax(ratio))
        if ratio[k] > best:
            best, pair = float(ratio[k]), (int(idx[i[k]]), int(idx[j[k]]))

    if exhaustive:
        for a in range(n - 1):
            others = np.arange(a + 1, n)
            scan(np.full(others.size, a), others)
    else:
        rng = np.random.default_rng(seed)
        total = config.certify.SAMPLED_PAIRS
        chunk = 100_000
        for start in range(0, total, chunk):
            m = min(chunk, total - start)
            scan(rng.integers(0, n, m), rng.integers(0, n, m))

    violation = 0.0
    if not exhaustive and n > 1:
        # sampled fits may miss pairs; consecutive nodes are the usual worst case
        i, j = np.arange(n - 1), np.arange(1, n)
        s = np.linalg.norm(pts[i] - pts[j], axis=1)
        keep = s > 0
        excess = np.abs(vals[i] - vals[j])[keep] - best * _modulus(form, s[keep], exponent)
        violation = float(np.max(excess, initial=0.0))
    return ModulusFit(
        form=form,
        radius=r,
        constant=best,
        exponent=None if form == ModulusForm.LIPSCHITZ else exponent,
        region=region,
        max_violation=violation,
        pair=pair,
        n_pairs=n_pairs,
        exhaustive=exhaustive,
    )


# ======================== POSITIVITY ========================


def sandwich_check(
    u_h: GridFunction, nonnegative_data: bool = True, config: Config = Config()
) -> SandwichResult:
    """
    Largest c and smallest C with c d <= u_h <= C d over interior nodes

    Raises:
        SignViolation: u_h < 0 somewhere while the data are nonnegative
    """
    grid = u_h.grid
    if nonnegative_data and float(np.min(u_h.values)) < -config.tolerances.ROUNDOFF:
        node = int(np.argmin(u_h.values))
        raise SignViolation(f"u_h = {u_h.values[node]:.3e} < 0 at node {node}")
    d = grid.node_distance()[grid.interior]
    ratio = u_h.values[grid.interior] / d
    c, C = float(np.min(ratio)), float(np.max(ratio))
    return SandwichResult(c=c, C=C, passed=bool(0.0 < c <= C < math.inf))


def _inward_neighbours(grid) -> List[Tuple[int, int]]:
    """(boundary node, next node along the inward normal); rectangle corners skipped"""
    if len(grid.shape) == 1:
        last = grid.n_nodes - 1
        if grid.radial:
            return [(last, last - 1)]
        return [(0, 1), (last, last - 1)]
    nx, ny = grid.shape
    out = []
    for node in grid.boundary:
        if grid.corner[node]:
            continue
        i, j = divmod(int(node), ny)
        if i == 0:
            out.append((node, node + ny))
        elif i == nx - 1:
            out.append((node, node - ny))
        elif j == 0:
            out.append((node, node + 1))
        else:
            out.append((node, node - 1))
    return out


def strong_max_probe(
    u_h: GridFunction, prob: ProblemSpec, config: Config = Config()
) -> StrongMaxResult:
    """
    Interior minimum away from the collar and inward difference quotients at zero boundary nodes

    The threshold is a fraction of the Hopf prediction for a boundary-mode barrier whose
    height is bounded by min u_h on the inner ball. u_h identically zero passes through the
    second branch of the dichotomy.
    """
    grid = u_h.grid
    dom = grid.domain
    tiny = config.tolerances.ROUNDOFF
    if float(np.max(np.abs(u_h.values))) <= tiny:
        return StrongMaxResult(
            interior_min=0.0, quotients=[], threshold=0.0, identically_zero=True, passed=True
        )

    d = grid.node_distance()
    deep = grid.interior[d[grid.interior] >= dom.collar_width - 1e-12]
    if deep.size == 0:
        deep = grid.interior
    interior_min = float(np.min(u_h.values[deep]))

    quotients = [
        float(u_h.values[inner] - u_h.values[node]) / grid.h
        for node, inner in _inward_neighbours(grid)
        if abs(u_h.values[node]) <= tiny
    ]

    R = 0.5 * dom.inradius
    inner_ball = grid.interior[d[grid.interior] >= 0.5 * R - 1e-12]
    m = float(np.min(u_h.values[inner_ball])) if inner_ball.size else 0.0
    threshold = 0.0
    if m > 0:
        centre = points_at_distance(dom, [R])[0]
        try:
            hb = hopf_barrier(
                dom,
                prob,
                delta_cap=min(1.0, m) / config.barriers.SAFETY,
                center=centre,
                radius=R,
                mode=HopfMode.BOUNDARY,
                config=config,
            )
            threshold = config.certify.HOPF_THRESHOLD_FRACTION * hb.predicted_quotient
        except (CrownOutsideDomain, HopfBarrierInfeasible) as exc:
            logger.warning(f"no Hopf threshold for {prob.name}: {exc}")

    passed = interior_min > 0 and all(q >= threshold and q > 0 for q in quotients)
    return StrongMaxResult(
        interior_min=interior_min,
        quotients=quotients,
        threshold=threshold,
        identically_zero=False,
        passed=bool(passed),
    )


# ======================== RANDOMISED COMPARISON SUITE ========================


def _literal(value: float) -> str:
    return f"({value!r})"


def _suite_instance(k: int, rng: np.random.Generator) -> dict:
    """Regimes cycle degenerate / singular / uniformly elliptic; two fixed corner cases first"""
    variants = list(OperatorVariant)
    if k == 0:
        alpha, beta, b0, b1 = 0.0, 2.0, 2.5, 0.0
    elif k == 1:
        alpha, beta, b0, b1 = 1.5, 0.5, float(rng.uniform(-1, 1)), 0.0
    else:
        regime = k % 3
        if regime == 0:
            alpha = float(rng.uniform(0.2, 1.5))
        elif regime == 1:
            alpha = float(rng.uniform(-0.6, -0.1))
        else:
            alpha = 0.0
        beta = float(rng.uniform(0.3, alpha + 2.0))
        b0, b1 = float(rng.uniform(-2, 2)), float(rng.uniform(-1, 1))
    return {
        "alpha": alpha,
        "beta": beta,
        "lambda": float(rng.uniform(0.5, 2.0)),
        "A": float(rng.uniform(1.0, 2.0)),
        "variant": variants[int(rng.integers(0, len(variants)))].value,
        "b": f"{_literal(b0)} + {_literal(b1)}*x",
        "f": f"{_literal(float(rng.uniform(-1, 1)))} + {_literal(float(rng.uniform(-1, 1)))}*sin(pi*x)",
        "phi": f"{_literal(float(rng.uniform(-0.5, 0.5)))} + {_literal(float(rng.uniform(-0.5, 0.5)))}*x",
    }


def _suite_problem(spec: dict, f_src: str, name: str) -> ProblemSpec:
    dom = make_interval(-1.0, 1.0)
    return ProblemSpec(
        domain=dom,
        exponents=ExponentProfile(alpha=spec["alpha"], beta=spec["beta"], lambda_=spec["lambda"]),
        pair=EllipticityPair(a=1.0, A=spec["A"]),
        variant=OperatorVariant(spec["variant"]),
        b_field=ScalarField.from_source(spec["b"], ("x",), "b"),
        f_field=ScalarField.from_source(f_src, ("x",), "f"),
        phi_field=ScalarField.from_source(spec["phi"], ("x",), "phi"),
        name=name,
    )


def comparison_suite(
    seed: Optional[int] = None,
    n: Optional[int] = None,
    params: SchemeParams = SchemeParams(),
    config: Config = Config(),
) -> List[CertificateRecord]:
    """
    Seeded random 1D instances on (-1, 1): a monotonicity probe plus the ordering of the
    solutions for g = f - gap (sub) and f (super)
    """
    seed = config.certify.DEFAULT_SEED if seed is None else seed
    n = config.certify.SUITE_INSTANCES if n is None else n
    rng = np.random.default_rng(seed)
    gap = config.certify.SUITE_GAP
    tolerance = 10.0 * params.tol
    records: List[CertificateRecord] = []

    for k in range(n):
        spec = _suite_instance(k, rng)
        digest = instance_hash({"seed": seed, "index": k, **spec})
        details = dict(spec)
        try:
            prob_f = validate_problem(_suite_problem(spec, spec["f"], f"suite-{k}-f"))
            prob_g = validate_problem(_suite_problem(spec, f"{spec['f']} - {gap!r}", f"suite-{k}-g"))
            grid = build_grid(prob_f.domain, config.certify.SUITE_SPACING)
            mono = monotonicity_probe(prob_f, grid, params, seed=seed + k, config=config)
            v_h, _ = solve(prob_f, grid, params, config=config)
            u_h, _ = solve(prob_g, grid, params, config=config)
            comp = comparison_probe(
                u_h, v_h, tolerance, comparison_hypothesis(prob_g, prob_f, grid), config
            )
        except DirichletError as exc:
            logger.warning(f"suite instance {k} failed: {exc}")
            details["error"] = f"{type(exc).__name__}: {exc}"
            records.append(
                CertificateRecord(
                    name="comparison_suite", instance_hash=digest, passed=False, margin=math.nan, details=details
                )
            )
            continue
        details.update(
            {
                "monotone": mono.passed,
                "neighbour_increase": mono.neighbour_increase,
                "self_increase": mono.self_increase,
                "hypothesis": comp.hypothesis,
                "node": comp.node,
            }
        )
        records.append(
            CertificateRecord(
                name="comparison_suite",
                instance_hash=digest,
                passed=bool(mono.passed and comp.passed),
                margin=comp.margin,
                location=list(comp.point),
                details=details,
            )
        )
    passed = sum(r.passed for r in records)
    logger.info(f"comparison suite seed={seed}: {passed}/{n} instances passed")
    return records


def barrier_values(spec: BarrierSpec, grid) -> GridFunction:
    """Barrier sampled at grid nodes"""
    return GridFunction(grid=grid, values=evaluate_barrier(spec, cartesian_nodes(grid))[0])
