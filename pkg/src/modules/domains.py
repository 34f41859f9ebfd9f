"""
Degenerate Dirichlet Toolkit - Domains and Fields
Interval, rectangle and ball geometry: distance profiles with a capped C2 extension,
uniform grids, problem validation and manufactured right-hand sides
"""

import logging
import math
import warnings
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from src.core.config import Config
from src.core.errors import (
    ExponentOutOfRange,
    FieldEvalError,
    KinkWarning,
    NonRadialData,
    OutsideDomain,
    SpacingTooCoarse,
    UnboundedCoefficient,
)
from src.core.schemas import (
    Domain,
    DomainKind,
    Grid,
    OperatorVariant,
    ProblemSpec,
    SymMatrix,
)
from src.modules.expressions import (
    BinOp,
    Call,
    Expr,
    Num,
    number,
    ScalarField,
    differentiate,
    parse_expression,
    simplify,
    to_source,
)

logger = logging.getLogger(__name__)

_GEOM_TOL = 1e-12


# ======================== CONSTRUCTION ========================


def _collar(inradius: float, collar_width: Optional[float]) -> float:
    delta0 = 0.5 * inradius if collar_width is None else float(collar_width)
    if not 0 < delta0 <= 0.5 * inradius + _GEOM_TOL:
        raise ValueError(f"collar_width={delta0} must lie in (0, inradius/2 = {0.5 * inradius}]")
    return delta0


def make_interval(lo: float, hi: float, collar_width: Optional[float] = None) -> Domain:
    if not hi > lo:
        raise ValueError(f"empty interval ({lo}, {hi})")
    delta0 = _collar(0.5 * (hi - lo), collar_width)
    return Domain(kind=DomainKind.INTERVAL, lo=(float(lo),), hi=(float(hi),), collar_width=delta0)


def make_rectangle(
    lo: Sequence[float], hi: Sequence[float], collar_width: Optional[float] = None
) -> Domain:
    lo_t = tuple(float(v) for v in lo)
    hi_t = tuple(float(v) for v in hi)
    if len(lo_t) != 2 or len(hi_t) != 2 or not all(h > l for l, h in zip(lo_t, hi_t)):
        raise ValueError(f"invalid rectangle {lo_t} x {hi_t}")
    delta0 = _collar(0.5 * min(h - l for l, h in zip(lo_t, hi_t)), collar_width)
    return Domain(kind=DomainKind.RECTANGLE, lo=lo_t, hi=hi_t, collar_width=delta0)


def make_ball(
    center: Sequence[float], radius: float, collar_width: Optional[float] = None
) -> Domain:
    c = tuple(float(v) for v in center)
    if len(c) != 2 or not radius > 0:
        raise ValueError("balls are two-dimensional with positive radius")
    delta0 = _collar(radius, collar_width)
    return Domain(
        kind=DomainKind.BALL,
        center=c,
        radius=float(radius),
        collar_width=delta0,
        hess_dist_bound=1.0 / (radius - delta0),
    )


# ======================== DISTANCE ========================


class DistanceProfile(NamedTuple):
    """Distance to the boundary, its derivatives, and the capped extension"""
    d: float
    grad: np.ndarray
    hess: SymMatrix
    in_collar: bool
    d_ext: float
    grad_ext: np.ndarray
    hess_ext: SymMatrix


def cap(t: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    C2 monotone cap S with S(t) = t on [0, 1], S = 3/2 beyond 2

    Returns:
        (S, S', S'') evaluated at t
    """
    t = np.asarray(t, dtype=float)
    s = np.clip(t - 1.0, 0.0, 1.0)
    value = np.where(t <= 1.0, t, 1.0 + s - s ** 3 + 0.5 * s ** 4)
    slope = np.where(t <= 1.0, 1.0, 1.0 - 3.0 * s ** 2 + 2.0 * s ** 3)
    curvature = np.where((t <= 1.0) | (t >= 2.0), 0.0, -6.0 * s + 6.0 * s ** 2)
    return value, slope, curvature


def contains(dom: Domain, pts: np.ndarray, tol: float = _GEOM_TOL) -> np.ndarray:
    """Closure membership for points of shape (n, dim)"""
    pts = np.atleast_2d(pts)
    if dom.kind == DomainKind.BALL:
        return np.linalg.norm(pts - np.asarray(dom.center), axis=1) <= dom.radius + tol
    lo = np.asarray(dom.lo)
    hi = np.asarray(dom.hi)
    return np.all((pts >= lo - tol) & (pts <= hi + tol), axis=1)


def domain_center(dom: Domain) -> Tuple[float, ...]:
    if dom.kind == DomainKind.BALL:
        return dom.center
    return tuple(0.5 * (l + h) for l, h in zip(dom.lo, dom.hi))


def as_points(dom: Domain, x) -> np.ndarray:
    """Coerce a point or array of points to shape (n, dim)"""
    pts = np.asarray(x, dtype=float)
    if dom.dim == 1:
        return pts.reshape(-1, 1)
    return pts.reshape(-1, dom.dim)


def distance_arrays(dom: Domain, x) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Raw distance to the boundary with gradient and Hessian (vectorised)

    Nearest-face ties go to the lowest face index (lo faces before hi faces, axis order).

    Returns:
        d (n,), grad (n, dim), hess (n, dim, dim)
    """
    pts = as_points(dom, x)
    if not np.all(contains(dom, pts)):
        bad = pts[~contains(dom, pts)][0]
        raise OutsideDomain(f"point {bad.tolist()} outside {dom.kind.value}")
    n, dim = pts.shape
    hess = np.zeros((n, dim, dim))
    if dom.kind == DomainKind.BALL:
        rel = pts - np.asarray(dom.center)
        rho = np.linalg.norm(rel, axis=1)
        d = dom.radius - rho
        safe = np.where(rho > 0, rho, 1.0)
        normal = np.where(rho[:, None] > 0, rel / safe[:, None], 0.0)
        grad = -normal
        eye = np.eye(dim)[None, :, :]
        proj = eye - normal[:, :, None] * normal[:, None, :]
        hess = np.where(rho[:, None, None] > 0, -proj / safe[:, None, None], 0.0)
        return d, grad, hess
    lo = np.asarray(dom.lo)
    hi = np.asarray(dom.hi)
    # faces ordered (lo_0, .., lo_{dim-1}, hi_0, .., hi_{dim-1})
    gaps = np.concatenate([pts - lo, hi - pts], axis=1)
    face = np.argmin(gaps, axis=1)
    d = gaps[np.arange(n), face]
    grad = np.zeros((n, dim))
    axis = face % dim
    grad[np.arange(n), axis] = np.where(face < dim, 1.0, -1.0)
    return d, grad, hess


def extend(
    dom: Domain, d: np.ndarray, grad: np.ndarray, hess: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Capped extension d_ext = delta0 * S(d / delta0) and its derivatives"""
    delta0 = dom.collar_width
    value, slope, curvature = cap(d / delta0)
    outer = grad[:, :, None] * grad[:, None, :]
    d_ext = delta0 * value
    grad_ext = slope[:, None] * grad
    hess_ext = slope[:, None, None] * hess + (curvature / delta0)[:, None, None] * outer
    return d_ext, grad_ext, hess_ext


def distance_profile(dom: Domain, x) -> DistanceProfile:
    """
    Distance profile at a single point

    Args:
        dom: domain
        x: point (scalar in 1D)

    Returns:
        DistanceProfile with in_collar = d < delta0

    Raises:
        OutsideDomain: x not in the closure
    """
    d, grad, hess = distance_arrays(dom, x)
    d_ext, grad_ext, hess_ext = extend(dom, d, grad, hess)
    return DistanceProfile(
        d=float(d[0]),
        grad=grad[0],
        hess=SymMatrix.from_array(hess[0]),
        in_collar=bool(d[0] < dom.collar_width),
        d_ext=float(d_ext[0]),
        grad_ext=grad_ext[0],
        hess_ext=SymMatrix.from_array(hess_ext[0]),
    )


def extension_hess_bound(dom: Domain) -> float:
    """Bound on |D2 d_ext| over the whole domain"""
    return dom.hess_dist_bound + 1.5 / dom.collar_width


def face_distance_arrays(
    dom: Domain, anchor: Sequence[float], x
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Distance to the boundary piece containing anchor

    Interval: the endpoint; rectangle: the side (a straight line, zero Hessian);
    ball: the circle itself.
    """
    pts = as_points(dom, x)
    anc = np.asarray(anchor, dtype=float).reshape(-1)
    n, dim = pts.shape
    if dom.kind == DomainKind.BALL:
        rho0 = np.linalg.norm(anc - np.asarray(dom.center))
        if abs(rho0 - dom.radius) > 1e-9:
            raise OutsideDomain(f"anchor {anc.tolist()} not on the boundary")
        return distance_arrays(dom, pts)
    lo = np.asarray(dom.lo)
    hi = np.asarray(dom.hi)
    gaps = np.concatenate([anc - lo, hi - anc])
    face = int(np.argmin(np.abs(gaps)))
    if abs(gaps[face]) > 1e-9:
        raise OutsideDomain(f"anchor {anc.tolist()} not on the boundary")
    axis = face % dim
    sign = 1.0 if face < dim else -1.0
    base = lo[axis] if face < dim else hi[axis]
    d = sign * (pts[:, axis] - base)
    grad = np.zeros((n, dim))
    grad[:, axis] = sign
    return d, grad, np.zeros((n, dim, dim))


def inward_normal(dom: Domain, anchor: Sequence[float]) -> np.ndarray:
    """Unit inward normal at a boundary point (not a rectangle corner)"""
    anc = np.asarray(anchor, dtype=float).reshape(-1)
    if dom.kind == DomainKind.BALL:
        rel = np.asarray(dom.center) - anc
        return rel / np.linalg.norm(rel)
    _, grad, _ = face_distance_arrays(dom, anc, anc)
    return grad[0]


# ======================== SAMPLING ========================


def sample_points(dom: Domain, n: int) -> np.ndarray:
    """Deterministic sweep of about n points covering the closure"""
    if dom.kind == DomainKind.INTERVAL:
        return np.linspace(dom.lo[0], dom.hi[0], n).reshape(-1, 1)
    m = max(3, int(math.ceil(math.sqrt(n))))
    if dom.kind == DomainKind.RECTANGLE:
        xs = np.linspace(dom.lo[0], dom.hi[0], m)
        ys = np.linspace(dom.lo[1], dom.hi[1], m)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()])
    radii = np.linspace(0.0, dom.radius, m)
    angles = np.linspace(0.0, 2.0 * math.pi, m, endpoint=False)
    R, T = np.meshgrid(radii, angles, indexing="ij")
    return np.column_stack(
        [dom.center[0] + (R * np.cos(T)).ravel(), dom.center[1] + (R * np.sin(T)).ravel()]
    )


def points_at_distance(dom: Domain, d_values: Sequence[float]) -> np.ndarray:
    """One point per requested distance, cycling over faces (or angles for a ball)"""
    d_values = np.asarray(d_values, dtype=float)
    k = np.arange(len(d_values))
    if dom.kind == DomainKind.INTERVAL:
        x = np.where(k % 2 == 0, dom.lo[0] + d_values, dom.hi[0] - d_values)
        return x.reshape(-1, 1)
    if dom.kind == DomainKind.BALL:
        theta = 2.0 * math.pi * ((k * 0.6180339887498949) % 1.0)
        rho = dom.radius - d_values
        return np.column_stack(
            [dom.center[0] + rho * np.cos(theta), dom.center[1] + rho * np.sin(theta)]
        )
    lo = np.asarray(dom.lo)
    hi = np.asarray(dom.hi)
    # positions along each side stay off the corner regions
    t = 0.5 + 0.4 * np.sin(2.0 * math.pi * ((k * 0.6180339887498949) % 1.0))
    pts = np.zeros((len(d_values), 2))
    face = k % 4
    along_x = lo[0] + t * (hi[0] - lo[0])
    along_y = lo[1] + t * (hi[1] - lo[1])
    pts[face == 0] = np.column_stack([lo[0] + d_values, along_y])[face == 0]
    pts[face == 1] = np.column_stack([along_x, lo[1] + d_values])[face == 1]
    pts[face == 2] = np.column_stack([hi[0] - d_values, along_y])[face == 2]
    pts[face == 3] = np.column_stack([along_x, hi[1] - d_values])[face == 3]
    return pts


# ======================== GRIDS ========================


def build_grid(dom: Domain, h: float) -> Grid:
    """
    Uniform grid with effective spacing L/ceil(L/h)

    Balls get the radial grid r in [0, R]; r = 0 is an interior node.

    Raises:
        SpacingTooCoarse: h > delta0
    """
    if h <= 0:
        raise SpacingTooCoarse(f"h={h} must be positive")
    if h > dom.collar_width * (1.0 + 1e-12):
        raise SpacingTooCoarse(f"h={h} exceeds collar width {dom.collar_width}")

    if dom.kind in (DomainKind.INTERVAL, DomainKind.BALL):
        lo = 0.0 if dom.kind == DomainKind.BALL else dom.lo[0]
        length = dom.radius if dom.kind == DomainKind.BALL else dom.hi[0] - dom.lo[0]
        n = int(math.ceil(length / h - 1e-9))
        hh = length / n
        coords = (lo + hh * np.arange(n + 1)).reshape(-1, 1)
        if dom.kind == DomainKind.BALL:
            interior = np.arange(0, n)
            boundary = np.array([n])
        else:
            interior = np.arange(1, n)
            boundary = np.array([0, n])
        return Grid(
            domain=dom,
            h=hh,
            shape=(n + 1,),
            coords=coords,
            interior=interior,
            boundary=boundary,
            corner=np.zeros(n + 1, dtype=bool),
            radial=dom.kind == DomainKind.BALL,
        )

    lx = dom.hi[0] - dom.lo[0]
    ly = dom.hi[1] - dom.lo[1]
    nx = int(math.ceil(lx / h - 1e-9))
    hh = lx / nx
    ny = int(round(ly / hh))
    if ny < 2 or abs(ny * hh - ly) > 1e-9 * ly:
        raise ValueError(f"rectangle sides {lx} x {ly} not commensurate with spacing {hh}")
    xs = dom.lo[0] + hh * np.arange(nx + 1)
    ys = dom.lo[1] + hh * np.arange(ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    I, J = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="ij")
    I, J = I.ravel(), J.ravel()
    inner = (I > 0) & (I < nx) & (J > 0) & (J < ny)
    corner = ((I == 0) | (I == nx)) & ((J == 0) | (J == ny))
    return Grid(
        domain=dom,
        h=hh,
        shape=(nx + 1, ny + 1),
        coords=np.column_stack([X.ravel(), Y.ravel()]),
        interior=np.flatnonzero(inner),
        boundary=np.flatnonzero(~inner),
        corner=corner,
        radial=False,
    )


def cartesian_nodes(grid: Grid) -> np.ndarray:
    """Node positions in the domain's own coordinates (radial nodes placed along +x)"""
    if not grid.radial:
        return grid.coords
    c = np.asarray(grid.domain.center)
    r = grid.coords[:, 0]
    return np.column_stack([c[0] + r, np.full_like(r, c[1])])


# ======================== VALIDATION ========================


def _sweep_field(field: ScalarField, pts: np.ndarray, limit: float) -> float:
    values = np.atleast_1d(field(pts))
    bad = ~np.isfinite(values) | (np.abs(values) > limit)
    if bad.any():
        raise UnboundedCoefficient(
            f"field '{field.name}' unbounded near {pts[int(np.argmax(bad))].tolist()}"
        )
    return float(np.max(np.abs(values)))


def estimate_lipschitz(field: ScalarField, dom: Domain, h: Optional[float] = None) -> float:
    """sup |grad b| sampled on a grid 10x finer than the solver grid"""
    cfg = Config.domains
    if field.is_constant():
        return 0.0
    if h is None:
        n = cfg.LIPSCHITZ_BASE_POINTS * cfg.LIPSCHITZ_REFINEMENT
    else:
        n = int(math.ceil(dom.diameter / h)) * cfg.LIPSCHITZ_REFINEMENT + 1
    if dom.dim == 2:
        n = n * n
    pts = sample_points(dom, n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", KinkWarning)
        grad = np.atleast_2d(field.gradient(pts))
    norms = np.linalg.norm(grad.reshape(len(pts), -1), axis=1)
    norms = norms[np.isfinite(norms)]
    return float(norms.max()) if norms.size else 0.0


def _check_radial(prob: ProblemSpec) -> None:
    dom = prob.domain
    k = Config.domains.RADIAL_CHECK_ANGLES
    radii = np.linspace(0.0, dom.radius, 7)
    angles = 2.0 * math.pi * np.arange(k) / k
    for field in (prob.b_field, prob.f_field, prob.phi_field):
        for rho in radii:
            pts = np.column_stack(
                [dom.center[0] + rho * np.cos(angles), dom.center[1] + rho * np.sin(angles)]
            )
            vals = np.atleast_1d(field(pts))
            if np.ptp(vals) > 1e-10 * (1.0 + np.max(np.abs(vals))):
                raise NonRadialData(f"field '{field.name}' is not radial at |x - c| = {rho}")


def validate_problem(prob: ProblemSpec, h: Optional[float] = None) -> ProblemSpec:
    """
    Check exponent and ellipticity ranges, coefficient boundedness and radial symmetry

    Args:
        prob: problem to validate
        h: solver spacing, used to size the Lipschitz sampling grid

    Returns:
        copy of prob with b_lipschitz_bound, b_sup and f_sup filled in

    Raises:
        ExponentOutOfRange, UnboundedCoefficient, NonRadialData, FieldEvalError
    """
    exps = prob.exponents
    if not exps.alpha > -1:
        raise ExponentOutOfRange("alpha", exps.alpha, "(-1, inf)")
    if not 0 < exps.beta <= exps.alpha + 2 + 1e-12:
        raise ExponentOutOfRange("beta", exps.beta, "(0, alpha+2]")
    if not exps.lambda_ > 0:
        raise ExponentOutOfRange("lambda", exps.lambda_, "(0, inf)")
    if not prob.pair.a > 0:
        raise ExponentOutOfRange("a", prob.pair.a, "(0, A]")
    if not prob.pair.A >= prob.pair.a:
        raise ExponentOutOfRange("A", prob.pair.A, "[a, inf)")

    allowed = set(prob.domain.variables)
    for field in (prob.b_field, prob.f_field, prob.phi_field):
        extra = field.free_variables() - allowed
        if extra or field.variables != prob.domain.variables:
            raise FieldEvalError(field.name, f"variables {sorted(extra)} not in {sorted(allowed)}")

    limit = Config.domains.UNBOUNDED_LIMIT
    pts = sample_points(prob.domain, Config.domains.BOUNDEDNESS_SWEEP)
    f_sup = _sweep_field(prob.f_field, pts, limit)
    b_sup = _sweep_field(prob.b_field, pts, limit)
    _sweep_field(prob.phi_field, pts, limit)
    if prob.domain.kind == DomainKind.BALL:
        _check_radial(prob)

    lip = prob.b_lipschitz_bound
    if lip is None:
        lip = estimate_lipschitz(prob.b_field, prob.domain, h)
    logger.debug(f"validated {prob.name}: |f|inf={f_sup:.6g} |b|inf={b_sup:.6g} Lip(b)~{lip:.6g}")
    return prob.model_copy(update={"b_lipschitz_bound": lip, "b_sup": b_sup, "f_sup": f_sup})


# ======================== MANUFACTURED RIGHT-HAND SIDES ========================


class ManufacturedRHS(NamedTuple):
    field: ScalarField
    singular_points: List[Tuple[float, ...]]
    kinked: bool


def _add(*terms: Expr) -> Expr:
    out = terms[0]
    for t in terms[1:]:
        out = BinOp("+", out, t)
    return out


def _extremal_expr(eigs: Sequence[Expr], variant: OperatorVariant, a: float, A: float) -> Expr:
    if variant == OperatorVariant.TRACE:
        return _add(*eigs)
    pos = _add(*(Call("max", (e, Num(0.0))) for e in eigs))
    neg = _add(*(Call("min", (e, Num(0.0))) for e in eigs))
    up, down = (A, a) if variant == OperatorVariant.PUCCI_PLUS else (a, A)
    return BinOp("+", BinOp("*", number(up), pos), BinOp("*", number(down), neg))


def manufacture_rhs(u: Union[ScalarField, str], prob: ProblemSpec) -> ManufacturedRHS:
    """
    f := -F(Du, D2u) + b|Du|^beta + lambda|u|^alpha u, built symbolically

    Gradient and Hessian come from exact symbolic differentiation; Hessian eigenvalues in
    2D use the closed form (tr/2 +- sqrt(((h11-h22)/2)^2 + h12^2)). Where Du = 0 and
    alpha < 0 the operator is singular: those sweep points are listed.

    Warns:
        KinkWarning: u contains abs/min/max/sign
    """
    variables = prob.domain.variables
    if isinstance(u, str):
        u = ScalarField(parse_expression(u), variables, name="u")
    exps = prob.exponents
    alpha, beta = exps.alpha, exps.beta
    grads = [differentiate(u.expr, v) for v in variables]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", KinkWarning)
        hess = [[differentiate(g, v) for v in variables] for g in grads]

    if len(variables) == 1:
        eigs: List[Expr] = [hess[0][0]]
        grad_sq: Expr = BinOp("^", grads[0], Num(2.0))
    else:
        h11, h12, h22 = hess[0][0], hess[0][1], hess[1][1]
        mean = BinOp("/", BinOp("+", h11, h22), Num(2.0))
        radius = Call(
            "sqrt",
            (
                BinOp(
                    "+",
                    BinOp("^", BinOp("/", BinOp("-", h11, h22), Num(2.0)), Num(2.0)),
                    BinOp("^", h12, Num(2.0)),
                ),
            ),
        )
        eigs = [BinOp("-", mean, radius), BinOp("+", mean, radius)]
        grad_sq = BinOp("+", BinOp("^", grads[0], Num(2.0)), BinOp("^", grads[1], Num(2.0)))

    grad_norm = Call("sqrt", (grad_sq,)) if len(variables) == 2 else Call("abs", (grads[0],))
    weight = BinOp("^", grad_norm, number(alpha))
    operator = BinOp("*", weight, _extremal_expr(eigs, prob.variant, prob.pair.a, prob.pair.A))
    first = BinOp("*", prob.b_field.expr, BinOp("^", grad_norm, number(beta)))
    if alpha == 0:
        zero: Expr = BinOp("*", number(exps.lambda_), u.expr)
    else:
        # sign(u)|u|^(1+alpha) stays finite at u = 0 when alpha < 0
        zero = BinOp(
            "*",
            BinOp("*", number(exps.lambda_), Call("sign", (u.expr,))),
            BinOp("^", Call("abs", (u.expr,)), number(1.0 + alpha)),
        )
    f_expr = simplify(BinOp("+", BinOp("-", first, operator), zero))
    field = ScalarField(f_expr, variables, name="f")

    singular: List[Tuple[float, ...]] = []
    if alpha < 0:
        pts = sample_points(prob.domain, Config.domains.BOUNDEDNESS_SWEEP)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", KinkWarning)
            g = np.atleast_2d(u.gradient(pts)).reshape(len(pts), -1)
        flat = np.linalg.norm(g, axis=1) <= Config.tolerances.KINK_TOL
        singular = [tuple(float(c) for c in p) for p in pts[flat]]
        if singular:
            logger.warning(f"{len(singular)} singular point(s) with grad u = 0, alpha={alpha}")
    logger.debug(f"manufactured f = {to_source(f_expr)}")
    return ManufacturedRHS(field=field, singular_points=singular, kinked=u.has_kinks)
