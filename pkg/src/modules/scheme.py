"""
Degenerate Dirichlet Toolkit - Monotone Scheme
Finite-difference residual on interval, radial and rectangular grids, barrier brackets
and the explicit / Newton solvers with eps continuation
"""

import logging
import math
from typing import Dict, NamedTuple, Optional, Tuple

import numpy as np
from scipy import sparse, special
from scipy.sparse import linalg as sparse_linalg

from src.core.config import Config
from src.core.errors import BracketViolated, MaxItersExceeded
from src.core.schemas import (
    GradientVector,
    Grid,
    GridFunction,
    OperatorVariant,
    ProblemSpec,
    SchemeParams,
    Side,
    SolveMethod,
    SolveReport,
    Stencil,
)
from src.modules.barriers import certified_barrier, evaluate_barrier
from src.modules.domains import cartesian_nodes
from src.modules.expressions import ScalarField
from src.modules.operator_core import extremal_combination_array, structure_pair

logger = logging.getLogger(__name__)


# ======================== REGULARISED GRADIENT WEIGHT ========================


def weight_primitive(q: np.ndarray, eps: float, alpha: float) -> np.ndarray:
    """
    H_eps(q) = integral_0^q (s^2 + eps^2)^(alpha/2) ds

    Closed form q eps^alpha 2F1(-alpha/2, 1/2; 3/2; -q^2/eps^2); |q|^alpha q / (1+alpha)
    when eps = 0.
    """
    q = np.asarray(q, dtype=float)
    if alpha == 0:
        return q.copy()
    if eps == 0:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(q == 0.0, 0.0, np.abs(q) ** alpha * q / (1.0 + alpha))
    z = -((q / eps) ** 2)
    return q * eps ** alpha * special.hyp2f1(-0.5 * alpha, 0.5, 1.5, z)


def weight_value(q: np.ndarray, eps: float, alpha: float) -> np.ndarray:
    """(q^2 + eps^2)^(alpha/2), the derivative of H_eps"""
    q = np.asarray(q, dtype=float)
    if alpha == 0:
        return np.ones_like(q)
    with np.errstate(divide="ignore"):
        return (q * q + eps * eps) ** (0.5 * alpha)


def curvature_flux(q: np.ndarray, eps: float, alpha: float) -> np.ndarray:
    """K_eps(q) = (q^2 + eps^2)^(alpha/2) q, zero at q = 0"""
    q = np.asarray(q, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(q == 0.0, 0.0, weight_value(q, eps, alpha) * q)


def curvature_flux_slope(q: np.ndarray, eps: float, alpha: float) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if alpha == 0:
        return np.ones_like(q)
    s = q * q + eps * eps
    with np.errstate(divide="ignore", invalid="ignore"):
        return s ** (0.5 * alpha - 1.0) * ((1.0 + alpha) * q * q + eps * eps)


def _upwind(dm: np.ndarray, dp: np.ndarray, positive: np.ndarray) -> np.ndarray:
    """
    Rouy-Tourin one-sided magnitude

    b >= 0: max(D-, -D+, 0), nondecreasing in u_i and nonincreasing in the neighbours;
    b < 0:  max(D+, -D-, 0), the mirror image, so b * G^beta is monotone either way.
    """
    up = np.maximum(np.maximum(dm, -dp), 0.0)
    down = np.maximum(np.maximum(dp, -dm), 0.0)
    return np.where(positive, up, down)


# ======================== DISCRETE OPERATOR ========================


class HessianExtremes(NamedTuple):
    differences: Dict[str, float]
    lambda_min: float
    lambda_max: float


class Bracket(NamedTuple):
    lower: GridFunction
    upper: GridFunction
    lower_certified: bool = True  # constant sides are exact sub/supersolutions
    upper_certified: bool = True
    residuals: Dict[str, float] = {}  # side -> minimum oriented barrier residual

    @property
    def certified(self) -> bool:
        return self.lower_certified and self.upper_certified


class MonotonicityReport(NamedTuple):
    neighbour_increase: float  # largest residual increase caused by raising a neighbour
    self_increase: float  # smallest residual increase caused by raising the node itself
    nodes: int
    passed: bool


_AXIS_PAIRS = (("e1", "e2"),)
_WIDE_PAIRS = (("e1", "e2"), ("d1", "d2"))


class DiscreteOperator:
    """
    Residual of the monotone scheme on a fixed grid

    Boundary rows are u - phi. Interior rows are
    -Phi(weighted Hessian surrogate) + b G^beta + gamma(u) - f
    with G the upwind gradient magnitude (or the centred one when monotone_gradient is off).
    """

    def __init__(
        self,
        prob: ProblemSpec,
        grid: Grid,
        params: SchemeParams = SchemeParams(),
        config: Config = Config(),
    ):
        self.prob = prob
        self.grid = grid
        self.params = params
        self.config = config
        self.h = grid.h
        self.n = grid.n_nodes
        self.interior = grid.interior
        self.boundary = grid.boundary
        self.pair = structure_pair(prob.variant, prob.pair)

        pts = cartesian_nodes(grid)
        self.nodes = pts
        self.b = np.broadcast_to(prob.b_field.checked(pts), (self.n,)).astype(float)
        self.f = np.broadcast_to(prob.f_field.checked(pts), (self.n,)).astype(float)
        self.phi = np.zeros(self.n)
        self.phi[self.boundary] = np.atleast_1d(prob.phi_field.checked(pts[self.boundary]))

        if grid.radial:
            self.mode = "radial"
        elif len(grid.shape) == 1:
            self.mode = "line"
        else:
            self.mode = "rectangle"
        self._build_coloring()

    # ---------------------------------------------------------------- stencils

    def _build_coloring(self) -> None:
        """Neighbour pairs (row, col) and a 3- or 9-colouring separating stencils"""
        if self.mode == "rectangle":
            nx, ny = self.grid.shape
            I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
            I, J = I.ravel(), J.ravel()
            rows, cols = [], []
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    ii, jj = I + di, J + dj
                    ok = (ii >= 0) & (ii < nx) & (jj >= 0) & (jj < ny)
                    rows.append((I * ny + J)[ok])
                    cols.append((ii * ny + jj)[ok])
            self.colors = (I % 3) * 3 + J % 3
            self.n_colors = 9
        else:
            idx = np.arange(self.n)
            rows, cols = [], []
            for d in (-1, 0, 1):
                ok = (idx + d >= 0) & (idx + d < self.n)
                rows.append(idx[ok])
                cols.append(idx[ok] + d)
            self.colors = idx % 3
            self.n_colors = 3
        self.pair_rows = np.concatenate(rows)
        self.pair_cols = np.concatenate(cols)

    def _line_differences(self, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Centre values and one-sided differences at interior nodes (ghost u_-1 = u_1 at r = 0)"""
        h = self.h
        if self.mode == "radial":
            centre = u[:-1]
            left = np.concatenate([u[1:2], u[:-2]])
            right = u[1:]
        else:
            centre = u[1:-1]
            left = u[:-2]
            right = u[2:]
        return centre, (centre - left) / h, (right - centre) / h

    def _line_second_order(self, dm: np.ndarray, dp: np.ndarray, eps: float, variant) -> np.ndarray:
        alpha = self.prob.exponents.alpha
        t = (weight_primitive(dp, eps, alpha) - weight_primitive(dm, eps, alpha)) / self.h
        value = extremal_combination_array(t, variant, self.pair)
        if self.mode != "radial":
            return value
        N = len(self.grid.domain.center)
        r = self.grid.coords[:-1, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            curv = np.where(r > 0, curvature_flux(dp, eps, alpha) / np.where(r > 0, r, 1.0), t)
        return value + (N - 1) * extremal_combination_array(curv, variant, self.pair)

    def _rect_views(self, u: np.ndarray) -> Dict[str, np.ndarray]:
        U = u.reshape(self.grid.shape)
        return {
            "C": U[1:-1, 1:-1],
            "E": U[2:, 1:-1],
            "W": U[:-2, 1:-1],
            "N": U[1:-1, 2:],
            "S": U[1:-1, :-2],
            "NE": U[2:, 2:],
            "SW": U[:-2, :-2],
            "NW": U[:-2, 2:],
            "SE": U[2:, :-2],
        }

    def _rect_differences(self, v: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
        h2 = self.h * self.h
        C = v["C"]
        return {
            "e1": (v["E"] - 2 * C + v["W"]) / h2,
            "e2": (v["N"] - 2 * C + v["S"]) / h2,
            "d1": (v["NE"] - 2 * C + v["SW"]) / (2 * h2),
            "d2": (v["SE"] - 2 * C + v["NW"]) / (2 * h2),
        }

    def _pucci_surrogate(self, diffs: Dict[str, np.ndarray], variant) -> np.ndarray:
        """Extremal combination maximised (M+) or minimised (M-) over orthogonal direction pairs"""
        if variant == OperatorVariant.TRACE:
            return diffs["e1"] + diffs["e2"]
        pairs = _WIDE_PAIRS if self.params.stencil == Stencil.WIDE else _AXIS_PAIRS
        sums = np.stack(
            [
                extremal_combination_array(diffs[p], variant, self.pair)
                + extremal_combination_array(diffs[q], variant, self.pair)
                for p, q in pairs
            ]
        )
        return sums.max(axis=0) if variant == OperatorVariant.PUCCI_PLUS else sums.min(axis=0)

    def _rect_weight(self, v: Dict[str, np.ndarray], eps: float) -> np.ndarray:
        alpha = self.prob.exponents.alpha
        if alpha == 0:
            return np.ones_like(v["C"])
        px = (v["E"] - v["W"]) / (2 * self.h)
        py = (v["N"] - v["S"]) / (2 * self.h)
        with np.errstate(divide="ignore"):
            return (px * px + py * py + eps * eps) ** (0.5 * alpha)

    # ---------------------------------------------------------------- residual

    def _gradient_term(self, G2: np.ndarray) -> np.ndarray:
        beta = self.prob.exponents.beta
        return self.b[self.interior] * G2 ** (0.5 * beta)

    def interior_residual(
        self, u: np.ndarray, eps: float, frozen: Optional[np.ndarray] = None
    ) -> np.ndarray:
        """Interior rows; frozen supplies the state the rectangle weight is taken from"""
        variant = self.prob.variant
        positive = self.b[self.interior] >= 0
        if self.mode == "rectangle":
            v = self._rect_views(u)
            C = v["C"]
            weight_src = v if frozen is None else self._rect_views(frozen)
            weight = self._rect_weight(weight_src, eps).ravel()
            surrogate = self._pucci_surrogate(self._rect_differences(v), variant).ravel()
            with np.errstate(invalid="ignore"):
                second = np.where(surrogate == 0.0, 0.0, weight * surrogate)
            h = self.h
            if self.params.monotone_gradient:
                gx = _upwind(((C - v["W"]) / h).ravel(), ((v["E"] - C) / h).ravel(), positive)
                gy = _upwind(((C - v["S"]) / h).ravel(), ((v["N"] - C) / h).ravel(), positive)
            else:
                gx = ((v["E"] - v["W"]) / (2 * h)).ravel()
                gy = ((v["N"] - v["S"]) / (2 * h)).ravel()
            G2 = gx * gx + gy * gy
            centre = C.ravel()
        else:
            centre, dm, dp = self._line_differences(u)
            second = self._line_second_order(dm, dp, eps, variant)
            if self.params.monotone_gradient:
                G = _upwind(dm, dp, positive)
            else:
                G = 0.5 * (dm + dp)
            G2 = G * G
        zero = self.prob.zero_order.gamma(centre)
        return -second + self._gradient_term(G2) + zero - self.f[self.interior]

    def residual(self, u: np.ndarray, eps: float, frozen: Optional[np.ndarray] = None) -> np.ndarray:
        out = np.empty(self.n)
        out[self.boundary] = u[self.boundary] - self.phi[self.boundary]
        out[self.interior] = self.interior_residual(u, eps, frozen)
        return out

    def sensitivity(self, u: np.ndarray, eps: float) -> np.ndarray:
        """Per-node bound on d residual_i / d u_i at the current state"""
        exps = self.prob.exponents
        h = self.h
        A = self.pair.A
        if self.mode == "rectangle":
            v = self._rect_views(u)
            second = 4.0 * A * self._rect_weight(v, eps).ravel() / (h * h)
            C = v["C"]
            gx = np.maximum(np.abs(C - v["W"]), np.abs(v["E"] - C)) / h
            gy = np.maximum(np.abs(C - v["S"]), np.abs(v["N"] - C)) / h
            G = np.hypot(gx, gy).ravel()
            dims = 2.0
            centre = C.ravel()
        else:
            centre, dm, dp = self._line_differences(u)
            slope = weight_value(dp, eps, exps.alpha) + weight_value(dm, eps, exps.alpha)
            second = A * slope / (h * h)
            if self.mode == "radial":
                N = len(self.grid.domain.center)
                r = self.grid.coords[:-1, 0]
                curv = curvature_flux_slope(dp, eps, exps.alpha) / (np.where(r > 0, r, 1.0) * h)
                second = np.where(r > 0, second + (N - 1) * A * curv, N * second)
            G = np.maximum(np.abs(dm), np.abs(dp))
            dims = 1.0
        with np.errstate(divide="ignore"):
            first = (
                np.abs(self.b[self.interior])
                * exps.beta
                * (G * G + eps * eps) ** (0.5 * (exps.beta - 1.0))
                * dims
                / h
            )
        zero = self.prob.zero_order.slope(centre, floor=eps)
        out = np.ones(self.n)
        out[self.interior] = second + first + zero
        return out

    def jacobian(self, u: np.ndarray, eps: float, base: Optional[np.ndarray] = None) -> sparse.csc_matrix:
        """Coloured forward-difference Jacobian"""
        if base is None:
            base = self.residual(u, eps)
        step = self.config.scheme.FD_JACOBIAN_STEP * np.maximum(1.0, np.abs(u))
        rows = self.pair_rows
        cols = self.pair_cols
        col_colors = self.colors[cols]
        values = np.zeros(rows.size)
        for c in range(self.n_colors):
            members = self.colors == c
            if not members.any():
                continue
            perturbed = u + np.where(members, step, 0.0)
            diff = self.residual(perturbed, eps) - base
            sel = col_colors == c
            values[sel] = diff[rows[sel]] / step[cols[sel]]
        keep = values != 0.0
        return sparse.csc_matrix(
            (values[keep], (rows[keep], cols[keep])), shape=(self.n, self.n)
        )

    def with_boundary(self, u: np.ndarray) -> np.ndarray:
        out = np.array(u, dtype=float)
        out[self.boundary] = self.phi[self.boundary]
        return out


# ======================== POINTWISE DIAGNOSTICS ========================


def _check_interior(grid: Grid, node: int) -> None:
    if node not in set(grid.interior.tolist()):
        raise ValueError(f"node {node} is not an interior node")


def discrete_gradient(u: GridFunction, node: int, eps: float = 0.0) -> GradientVector:
    """Centred difference gradient at an interior node (radial: zero at r = 0)"""
    grid = u.grid
    _check_interior(grid, node)
    h = grid.h
    vals = u.values
    if grid.radial:
        if node == 0:
            return GradientVector(components=(0.0,), eps=eps)
        return GradientVector(components=((vals[node + 1] - vals[node - 1]) / (2 * h),), eps=eps)
    if len(grid.shape) == 1:
        return GradientVector(components=((vals[node + 1] - vals[node - 1]) / (2 * h),), eps=eps)
    ny = grid.shape[1]
    gx = (vals[node + ny] - vals[node - ny]) / (2 * h)
    gy = (vals[node + 1] - vals[node - 1]) / (2 * h)
    return GradientVector(components=(gx, gy), eps=eps)


def monotone_gradient_magnitude(u: GridFunction, node: int, b_sign: float = 1.0) -> float:
    """Upwind magnitude used for the first-order term at one node"""
    grid = u.grid
    _check_interior(grid, node)
    h = grid.h
    vals = u.values
    positive = np.array([b_sign >= 0])
    if len(grid.shape) == 1:
        left = vals[1] if (grid.radial and node == 0) else vals[node - 1]
        dm = np.array([(vals[node] - left) / h])
        dp = np.array([(vals[node + 1] - vals[node]) / h])
        return float(_upwind(dm, dp, positive)[0])
    ny = grid.shape[1]
    c = vals[node]
    gx = _upwind(np.array([(c - vals[node - ny]) / h]), np.array([(vals[node + ny] - c) / h]), positive)
    gy = _upwind(np.array([(c - vals[node - 1]) / h]), np.array([(vals[node + 1] - c) / h]), positive)
    return float(math.hypot(gx[0], gy[0]))


def discrete_hessian_extremes(
    u: GridFunction, node: int, stencil: Stencil = Stencil.WIDE
) -> HessianExtremes:
    """
    Directional second differences and the extremal eigenvalue surrogates

    Ties in the minimum / maximum go to the lowest direction index.
    """
    grid = u.grid
    _check_interior(grid, node)
    h = grid.h
    vals = u.values
    if len(grid.shape) == 1:
        left = vals[1] if (grid.radial and node == 0) else vals[node - 1]
        diffs = {"e1": (vals[node + 1] - 2 * vals[node] + left) / (h * h)}
        if grid.radial:
            r = grid.coords[node, 0]
            diffs["theta"] = diffs["e1"] if r == 0 else (vals[node + 1] - left) / (2 * h * r)
    else:
        ny = grid.shape[1]
        c = vals[node]
        diffs = {
            "e1": (vals[node + ny] - 2 * c + vals[node - ny]) / (h * h),
            "e2": (vals[node + 1] - 2 * c + vals[node - 1]) / (h * h),
        }
        if stencil == Stencil.WIDE:
            diffs["d1"] = (vals[node + ny + 1] - 2 * c + vals[node - ny - 1]) / (2 * h * h)
            diffs["d2"] = (vals[node + ny - 1] - 2 * c + vals[node - ny + 1]) / (2 * h * h)
    ordered = list(diffs.values())
    return HessianExtremes(
        differences={k: float(v) for k, v in diffs.items()},
        lambda_min=float(ordered[int(np.argmin(ordered))]),
        lambda_max=float(ordered[int(np.argmax(ordered))]),
    )


def discrete_residual(
    u: GridFunction,
    prob: ProblemSpec,
    params: SchemeParams = SchemeParams(),
    eps: Optional[float] = None,
) -> GridFunction:
    """Scheme residual at every node; eps defaults to the final continuation level"""
    op = DiscreteOperator(prob, u.grid, params)
    level = params.eps_for(u.grid.h) if eps is None else eps
    return u.with_values(op.residual(u.values, level))


def interpolate(field: ScalarField, grid: Grid) -> GridFunction:
    """Sample a field at the grid nodes"""
    values = np.broadcast_to(field(cartesian_nodes(grid)), (grid.n_nodes,))
    return GridFunction(grid=grid, values=np.asarray(values, dtype=float).copy())


def max_error(u: GridFunction, exact: ScalarField) -> float:
    return float(np.max(np.abs(u.values - interpolate(exact, u.grid).values)))


def monotonicity_probe(
    prob: ProblemSpec,
    grid: Grid,
    params: SchemeParams = SchemeParams(),
    u: Optional[GridFunction] = None,
    seed: int = 0,
    config: Config = Config(),
) -> MonotonicityReport:
    """
    Raise every node of one colour at a time and watch the residual rows

    Neighbour raises must not increase a row; raising the row's own node must increase it.
    The rectangle weight is frozen at the unperturbed state.
    """
    op = DiscreteOperator(prob, grid, params, config)
    rng = np.random.default_rng(seed)
    base_values = rng.uniform(-1.0, 1.0, grid.n_nodes) if u is None else u.values.copy()
    base_values = op.with_boundary(base_values)
    eps = params.eps_for(grid.h)
    base = op.residual(base_values, eps, frozen=base_values)
    delta = config.scheme.MONOTONICITY_PROBE_STEP
    interior = np.zeros(grid.n_nodes, dtype=bool)
    interior[grid.interior] = True

    rows, cols = op.pair_rows, op.pair_cols
    keep = interior[rows]
    rows, cols = rows[keep], cols[keep]
    worst_neighbour = -math.inf
    weakest_self = math.inf
    for c in range(op.n_colors):
        members = op.colors == c
        if not members.any():
            continue
        diff = op.residual(base_values + delta * members, eps, frozen=base_values) - base
        sel = op.colors[cols] == c
        r_sel, c_sel = rows[sel], cols[sel]
        own = r_sel == c_sel
        if (~own).any():
            worst_neighbour = max(worst_neighbour, float(np.max(diff[r_sel[~own]])))
        if own.any():
            weakest_self = min(weakest_self, float(np.min(diff[r_sel[own]])))
    scale = max(1.0, float(np.max(np.abs(base))))
    tol = config.tolerances.MONOTONICITY * scale
    passed = worst_neighbour <= tol and weakest_self > 0.0
    return MonotonicityReport(
        neighbour_increase=worst_neighbour,
        self_increase=weakest_self,
        nodes=int(grid.interior.size),
        passed=bool(passed),
    )


# ======================== BRACKET ========================


def bracket_from_barriers(
    prob: ProblemSpec,
    grid: Grid,
    f_bound: Optional[float] = None,
    phi_bound: Optional[float] = None,
    config: Config = Config(),
) -> Bracket:
    """
    Ordered sub/supersolution pair built from the certified global barrier

    Constant brackets replace a barrier side whenever the sign of f allows it:
    f <= 0 gives u_plus = |phi|inf and f >= 0 gives u_minus = -|phi|inf.
    A barrier side that fails its residual check is kept but marked uncertified.
    """
    pts = cartesian_nodes(grid)
    f_nodes = np.atleast_1d(prob.f_field(pts))
    if f_bound is None:
        f_bound = max(float(np.max(np.abs(f_nodes))), prob.f_sup or 0.0)
    if phi_bound is None:
        phi_bound = float(np.max(np.abs(np.atleast_1d(prob.phi_field(pts[grid.boundary])))))
    tiny = config.tolerances.ROUNDOFF
    n = grid.n_nodes
    level = f_bound + config.barriers.DATUM_LIFT
    certified = {Side.SUPER: True, Side.SUB: True}
    residuals: Dict[str, float] = {}

    def barrier_side(side: Side) -> np.ndarray:
        spec = certified_barrier(prob, level, side, config)
        residuals[side.value] = spec.min_residual
        logger.debug(f"{side.value} bracket from barrier: C={spec.constants.C:.6g} certified={spec.certified}")
        if not spec.certified:
            certified[side] = False
            logger.warning(
                f"{side.value} barrier for {prob.name} is not certified "
                f"(min residual {spec.min_residual:.3g} at level {level:.3g}); bracket may not enclose u_h"
            )
        return evaluate_barrier(spec, pts)[0]

    if np.all(f_nodes <= tiny):
        upper = np.full(n, phi_bound)
    else:
        upper = barrier_side(Side.SUPER) + phi_bound
    if np.all(f_nodes >= -tiny):
        lower = np.full(n, -phi_bound)
    else:
        lower = barrier_side(Side.SUB) - phi_bound
    return Bracket(
        lower=GridFunction(grid=grid, values=lower),
        upper=GridFunction(grid=grid, values=upper),
        lower_certified=certified[Side.SUB],
        upper_certified=certified[Side.SUPER],
        residuals=residuals,
    )


def bracket_slack(op: DiscreteOperator, bracket: Bracket, eps: float) -> float:
    """How far the bracket misses the discrete sub/supersolution inequalities"""
    lower = op.residual(bracket.lower.values, eps)
    upper = op.residual(bracket.upper.values, eps)
    slack = max(float(np.max(lower)), float(np.max(-upper)), 0.0)
    if slack > 0:
        logger.debug(f"bracket consistency slack {slack:.3g} at eps={eps:.3g}")
    return slack


# ======================== SOLVERS ========================


def continuation_schedule(h: float, params: SchemeParams) -> np.ndarray:
    """Geometric eps levels from h^(1/2) down to eps_for(h)"""
    final = params.eps_for(h)
    start = max(math.sqrt(h), final)
    steps = params.continuation_steps
    if steps == 1 or start == final:
        return np.array([final])
    return start * (final / start) ** (np.arange(steps) / (steps - 1))


def _bracket_margin(u: np.ndarray, bracket: Bracket) -> float:
    return float(min(np.min(u - bracket.lower.values), np.min(bracket.upper.values - u)))


class SchemeSolver:
    """
    Solver instance bound to one problem and grid

    Each eps level restarts from the previous level's iterate; only the last level must
    reach tol.
    """

    def __init__(
        self,
        prob: ProblemSpec,
        grid: Grid,
        params: SchemeParams = SchemeParams(),
        config: Config = Config(),
    ):
        self.prob = prob
        self.grid = grid
        self.params = params
        self.config = config
        self.op = DiscreteOperator(prob, grid, params, config)

    def solve(
        self,
        initial: Optional[GridFunction] = None,
        bracket: Optional[Bracket] = None,
        start: str = "upper",
    ) -> Tuple[GridFunction, SolveReport]:
        params = self.params
        if bracket is None:
            bracket = bracket_from_barriers(self.prob, self.grid, config=self.config)
        if initial is None:
            initial = bracket.upper if start == "upper" else bracket.lower
        u = self.op.with_boundary(initial.values)
        report = SolveReport(
            method=params.method,
            bracket_certified=bracket.certified,
            bracket_residuals=dict(bracket.residuals),
        )
        levels = continuation_schedule(self.grid.h, params)
        logger.info(
            f"solve {self.prob.name}: {params.method.value}, {self.grid.n_nodes} nodes, "
            f"h={self.grid.h:.4g}, eps levels {len(levels)}"
        )

        for k, eps in enumerate(levels):
            final = k == len(levels) - 1
            tol = params.tol if final else max(params.tol, self.config.scheme.CONTINUATION_TOL)
            report.eps_history.append(float(eps))
            if params.method == SolveMethod.EXPLICIT:
                u, done = self._explicit_level(u, float(eps), tol, bracket, report)
            else:
                u, done = self._newton_level(u, float(eps), tol, bracket, report)
            logger.debug(f"eps={eps:.4g}: residual {report.residual_norm:.3e} converged={done}")
            if final:
                report.converged = done

        u = self.op.with_boundary(u)
        if not report.converged:
            raise MaxItersExceeded(
                f"residual {report.residual_norm:.3e} > tol {params.tol:.1e} after "
                f"{report.iterations} iterations",
                report,
            )
        logger.info(f"converged in {report.iterations} iterations, residual {report.residual_norm:.3e}")
        return GridFunction(grid=self.grid, values=u), report

    def _record(self, report: SolveReport, norm: float, u: np.ndarray, bracket: Bracket) -> None:
        report.residual_norm = norm
        report.residual_history.append(norm)
        report.bracket_margin_history.append(_bracket_margin(u, bracket))

    def _explicit_step(self, u: np.ndarray, R: np.ndarray, eps: float) -> Tuple[np.ndarray, float]:
        L = self.op.sensitivity(u, eps)
        dt = self.params.dt_factor / float(np.max(L[self.op.interior]))
        out = u - dt * R
        out[self.op.boundary] = self.op.phi[self.op.boundary]
        return out, dt

    def _explicit_level(
        self, u: np.ndarray, eps: float, tol: float, bracket: Bracket, report: SolveReport
    ) -> Tuple[np.ndarray, bool]:
        op = self.op
        lam = self.prob.exponents.lambda_
        band = self.params.bracket_tol + bracket_slack(op, bracket, eps) / lam
        every = self.config.scheme.RECORD_EVERY
        for it in range(self.params.max_explicit_iters):
            R = op.residual(u, eps)
            norm = float(np.max(np.abs(R)))
            if norm <= tol:
                self._record(report, norm, u, bracket)
                return u, True
            u, dt = self._explicit_step(u, R, eps)
            report.iterations += 1
            if it % every == 0:
                self._record(report, norm, u, bracket)
                report.dt_history.append(dt)
            margin = _bracket_margin(u, bracket)
            if margin < -band:
                report.bracket_preserved = False
                node = int(np.argmin(np.minimum(u - bracket.lower.values, bracket.upper.values - u)))
                raise BracketViolated(
                    f"iterate left the bracket by {-margin:.3e} at node {node} (iteration {report.iterations})"
                )
        self._record(report, float(np.max(np.abs(op.residual(u, eps)))), u, bracket)
        return u, report.residual_norm <= tol

    def _check_converged_bracket(
        self, u: np.ndarray, bracket: Bracket, band: float, report: SolveReport
    ) -> None:
        """A converged discrete solution must lie in [u_minus - band, u_plus + band]"""
        margin = _bracket_margin(u, bracket)
        if margin < -band:
            report.bracket_preserved = False
            node = int(np.argmin(np.minimum(u - bracket.lower.values, bracket.upper.values - u)))
            logger.error(f"converged iterate outside the bracket by {-margin:.3e} at node {node}")
            raise BracketViolated(
                f"converged iterate left the bracket by {-margin:.3e} at node {node} (band {band:.3e})"
            )

    def _newton_level(
        self, u: np.ndarray, eps: float, tol: float, bracket: Bracket, report: SolveReport
    ) -> Tuple[np.ndarray, bool]:
        op = self.op
        halvings = self.config.scheme.LINE_SEARCH_HALVINGS
        # a converged level still carries a residual up to tol
        band = self.params.bracket_tol + (bracket_slack(op, bracket, eps) + tol) / self.prob.exponents.lambda_
        for _ in range(self.params.max_iters):
            R = op.residual(u, eps)
            norm = float(np.max(np.abs(R)))
            self._record(report, norm, u, bracket)
            if norm <= tol:
                self._check_converged_bracket(u, bracket, band, report)
                return u, True
            report.iterations += 1
            J = op.jacobian(u, eps, R)
            du = sparse_linalg.spsolve(J, -R)
            step = 1.0
            accepted = False
            if np.all(np.isfinite(du)):
                for _ in range(halvings):
                    trial = u + step * du
                    trial_norm = float(np.max(np.abs(op.residual(trial, eps))))
                    if trial_norm < (1.0 - 1e-4 * step) * norm:
                        accepted = True
                        break
                    step *= 0.5
            if accepted:
                u = trial
                report.dt_history.append(step)
                continue
            logger.debug(f"line search stalled at residual {norm:.3e}; explicit sweeps")
            for _ in range(self.config.scheme.NEWTON_FALLBACK_SWEEPS):
                u, dt = self._explicit_step(u, op.residual(u, eps), eps)
            report.dt_history.append(dt)
        R = op.residual(u, eps)
        self._record(report, float(np.max(np.abs(R))), u, bracket)
        done = report.residual_norm <= tol
        if done:
            self._check_converged_bracket(u, bracket, band, report)
        return u, done


def solve(
    prob: ProblemSpec,
    grid: Grid,
    params: SchemeParams = SchemeParams(),
    initial: Optional[GridFunction] = None,
    bracket: Optional[Bracket] = None,
    start: str = "upper",
    config: Config = Config(),
) -> Tuple[GridFunction, SolveReport]:
    """
    Solve the discrete Dirichlet problem

    Raises:
        MaxItersExceeded: residual above tol after the last eps level (report attached)
        BracketViolated: an explicit iterate or a converged Newton iterate left [u_minus, u_plus]
    """
    return SchemeSolver(prob, grid, params, config).solve(initial, bracket, start)
