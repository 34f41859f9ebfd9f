"""
Degenerate Dirichlet Toolkit - Core Data Schemas
Defines the canonical data structures shared by the solver, barriers and certifier
"""

import math
from enum import Enum
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.core.config import SchemeDefaults
from src.modules.expressions import ScalarField


class OperatorVariant(str, Enum):
    """Canonical second-order operators |p|^alpha * {M+, M-, tr}"""
    PUCCI_PLUS = "pucci_plus"
    PUCCI_MINUS = "pucci_minus"
    TRACE = "trace"


class DomainKind(str, Enum):
    INTERVAL = "interval"
    RECTANGLE = "rectangle"
    BALL = "ball"


class Side(str, Enum):
    SUPER = "super"
    SUB = "sub"


class PointClass(str, Enum):
    """Classification of a sample point in a viscosity check"""
    CLASSICAL = "classical"
    ZERO_GRADIENT = "zero_gradient"
    LOCALLY_CONSTANT = "locally_constant"


class ModulusForm(str, Enum):
    LIPSCHITZ = "lipschitz"  # w(s) = s
    HOLDER = "holder"  # w(s) = s^gamma
    OMEGA = "omega"  # w(s) = s - s^(1+tau)/(2(1+tau)), capped


class SolveMethod(str, Enum):
    NEWTON = "newton"
    EXPLICIT = "explicit"


class Stencil(str, Enum):
    AXIS = "axis"
    WIDE = "wide"


class CheckName(str, Enum):
    """Certificates a verify run can request"""
    BARRIER = "barrier"
    CLASSICAL = "classical"
    ZERO_GRADIENT = "zero_gradient"
    MONOTONICITY = "monotonicity"
    COMPARISON_SUITE = "comparison_suite"
    UNIQUENESS = "uniqueness"
    SANDWICH = "sandwich"
    STRONG_MAX = "strong_max"
    MODULUS = "modulus"


class HopfMode(str, Enum):
    INTERIOR = "interior"  # crown B(x0,2R) minus B(x0,R/2)
    BOUNDARY = "boundary"  # annulus B(x0,R) minus B(x0,R/2), tangent to the boundary


class Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


# ======================== OPERATOR DATA ========================


class EllipticityPair(Frozen):
    """Ellipticity constants 0 < a <= A"""
    a: float
    A: float


class ExponentProfile(Frozen):
    """Exponents of the equation; ranges are enforced by validate_problem"""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    alpha: float
    beta: float
    lambda_: float = Field(alias="lambda")

    @property
    def critical(self) -> bool:
        """beta = alpha + 2"""
        return math.isclose(self.beta, self.alpha + 2.0, rel_tol=0.0, abs_tol=1e-12)


class SymMatrix(Frozen):
    """Symmetric N x N matrix, N in {1, 2}; only the upper triangle is stored"""
    dim: int = Field(ge=1, le=2)
    m11: float
    m12: float = 0.0
    m22: float = 0.0

    @classmethod
    def from_array(cls, arr: Any) -> "SymMatrix":
        m = np.atleast_2d(np.asarray(arr, dtype=float))
        if m.shape == (1, 1):
            return cls(dim=1, m11=float(m[0, 0]))
        # symmetrise whatever comes in
        return cls(dim=2, m11=float(m[0, 0]), m12=0.5 * float(m[0, 1] + m[1, 0]), m22=float(m[1, 1]))

    @classmethod
    def diag(cls, *values: float) -> "SymMatrix":
        if len(values) == 1:
            return cls(dim=1, m11=float(values[0]))
        return cls(dim=2, m11=float(values[0]), m22=float(values[1]))

    @classmethod
    def zero(cls, dim: int) -> "SymMatrix":
        return cls(dim=dim, m11=0.0)

    @classmethod
    def identity(cls, dim: int, scale: float = 1.0) -> "SymMatrix":
        return cls.diag(*([scale] * dim))

    def to_array(self) -> np.ndarray:
        if self.dim == 1:
            return np.array([[self.m11]])
        return np.array([[self.m11, self.m12], [self.m12, self.m22]])

    def eigenvalues(self) -> Tuple[float, ...]:
        """Closed form, ascending"""
        if self.dim == 1:
            return (self.m11,)
        mean = 0.5 * (self.m11 + self.m22)
        radius = math.hypot(0.5 * (self.m11 - self.m22), self.m12)
        return (mean - radius, mean + radius)

    def trace(self) -> float:
        return self.m11 if self.dim == 1 else self.m11 + self.m22

    def spectral_norm(self) -> float:
        return max(abs(v) for v in self.eigenvalues())

    def scaled(self, t: float) -> "SymMatrix":
        return SymMatrix(dim=self.dim, m11=t * self.m11, m12=t * self.m12, m22=t * self.m22)

    def __add__(self, other: "SymMatrix") -> "SymMatrix":
        return SymMatrix(
            dim=self.dim,
            m11=self.m11 + other.m11,
            m12=self.m12 + other.m12,
            m22=self.m22 + other.m22,
        )

    def __neg__(self) -> "SymMatrix":
        return self.scaled(-1.0)


class GradientVector(Frozen):
    """Gradient with regularisation eps >= 0"""
    components: Tuple[float, ...]
    eps: float = Field(default=0.0, ge=0.0)

    @property
    def dim(self) -> int:
        return len(self.components)

    def norm(self) -> float:
        return math.hypot(*self.components)

    def regularized_norm(self) -> float:
        return math.hypot(self.norm(), self.eps)

    def scaled(self, t: float) -> "GradientVector":
        return GradientVector(components=tuple(t * c for c in self.components), eps=self.eps)


class ZeroOrderTerm(Frozen):
    """gamma(u) = lambda |u|^alpha u"""
    lambda_: float
    alpha: float

    def gamma(self, u: Any) -> Any:
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.lambda_ * np.sign(u) * np.abs(u) ** (1.0 + self.alpha)
        return float(out) if out.ndim == 0 else out

    def slope(self, u: Any, floor: float = 0.0) -> Any:
        """lambda (1+alpha) |u|^alpha, with |u| floored for alpha < 0"""
        mag = np.maximum(np.abs(np.asarray(u, dtype=float)), floor)
        with np.errstate(divide="ignore"):
            out = self.lambda_ * (1.0 + self.alpha) * mag ** self.alpha
        return float(out) if out.ndim == 0 else out


# ======================== GEOMETRY / PROBLEM ========================


class Domain(Frozen):
    """Interval, rectangle or ball with collar width delta0 and distance-Hessian bound C1"""
    kind: DomainKind
    lo: Tuple[float, ...] = ()
    hi: Tuple[float, ...] = ()
    center: Tuple[float, ...] = ()
    radius: Optional[float] = None
    collar_width: float
    hess_dist_bound: float = 0.0

    @property
    def dim(self) -> int:
        if self.kind == DomainKind.INTERVAL:
            return 1
        return 2 if self.kind == DomainKind.RECTANGLE else len(self.center)

    @property
    def variables(self) -> Tuple[str, ...]:
        return ("x",) if self.dim == 1 else ("x", "y")

    @property
    def inradius(self) -> float:
        if self.kind == DomainKind.BALL:
            return float(self.radius)
        return 0.5 * min(h - l for l, h in zip(self.lo, self.hi))

    @property
    def diameter(self) -> float:
        if self.kind == DomainKind.BALL:
            return 2.0 * float(self.radius)
        return math.hypot(*(h - l for l, h in zip(self.lo, self.hi)))


class Grid(Frozen):
    """
    Uniform grid over a domain

    coords has shape (n, dim) for intervals and rectangles; for balls it is the radial
    grid r in [0, R] with shape (n, 1) and radial=True.
    """
    domain: Domain
    h: float
    shape: Tuple[int, ...]
    coords: np.ndarray
    interior: np.ndarray
    boundary: np.ndarray
    corner: np.ndarray
    radial: bool = False

    @property
    def n_nodes(self) -> int:
        return int(self.coords.shape[0])

    def node_distance(self) -> np.ndarray:
        """Distance to the boundary at every node"""
        dom = self.domain
        if self.radial:
            return float(dom.radius) - self.coords[:, 0]
        lo = np.asarray(dom.lo)
        hi = np.asarray(dom.hi)
        return np.min(np.concatenate([self.coords - lo, hi - self.coords], axis=1), axis=1)


class GridFunction(Frozen):
    """Nodal values on a grid; value semantics"""
    grid: Grid
    values: np.ndarray

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "GridFunction":
        return cls(grid=grid, values=np.full(grid.n_nodes, float(value)))

    def with_values(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(grid=self.grid, values=np.asarray(values, dtype=float).copy())

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def interior_values(self) -> np.ndarray:
        return self.values[self.grid.interior]


class ProblemSpec(Frozen):
    """Full instance of -F(Du, D2u) + b|Du|^beta + lambda|u|^alpha u = f with u = phi on the boundary"""
    domain: Domain
    exponents: ExponentProfile
    pair: EllipticityPair
    variant: OperatorVariant = OperatorVariant.PUCCI_PLUS
    b_field: ScalarField
    f_field: ScalarField
    phi_field: ScalarField
    b_lipschitz_bound: Optional[float] = None
    b_sup: Optional[float] = None
    f_sup: Optional[float] = None
    name: str = "problem"

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def zero_order(self) -> ZeroOrderTerm:
        return ZeroOrderTerm(lambda_=self.exponents.lambda_, alpha=self.exponents.alpha)

    def with_fields(self, **fields: Any) -> "ProblemSpec":
        return self.model_copy(update=fields)


# ======================== BARRIERS ========================


class BarrierConstants(Frozen):
    kappa: float
    C: float
    delta0_eff: float
    M_level: float
    safety: float = Field(default=1.1, ge=1.0)
    kappa_min: float = 0.0
    C_bounds: Dict[str, float] = {}


class BarrierSpec(Frozen):
    """
    Certified explicit sub/supersolution

    value(x) = sign * scale * ( min(log_branch(d(x)), cap_value)
                                + cubic_branch(|x - anchor| - r) [where >= 0]
                                + affine_part . (1, x) )
    with sign = +1 on the super side and -1 on the sub side.
    """
    kind: str  # global | boundary
    side: Side
    domain: Domain
    log_branch: ScalarField  # variable "d"
    cap_value: Optional[float] = None
    cubic_branch: Optional[ScalarField] = None  # variable "s"
    inner_radius: Optional[float] = None
    anchor: Optional[Tuple[float, ...]] = None
    affine_part: Optional[Tuple[float, ...]] = None  # (c0, c1[, c2])
    constants: Optional[BarrierConstants] = None
    scale: float = 1.0
    rescale_eps: Optional[float] = None
    min_residual: float = float("nan")
    certified: bool = False
    margins: Dict[str, float] = {}

    @property
    def sign(self) -> float:
        return 1.0 if self.side == Side.SUPER else -1.0


class HopfBarrier(Frozen):
    """v(r) = delta (exp(-c r) - exp(-c R)) on an annulus around center"""
    center: Tuple[float, ...]
    R: float
    inner_radius: float
    outer_radius: float
    delta: float
    c: float
    mode: HopfMode = HopfMode.INTERIOR
    dim: int = 1
    certified: bool = False
    max_residual: float = float("nan")

    @property
    def predicted_quotient(self) -> float:
        """|v'(R)| = delta c exp(-cR); times R gives the Hopf lower bound"""
        return self.delta * self.c * self.R * math.exp(-self.c * self.R)

    def profile(self, r: Any) -> Any:
        return self.delta * (np.exp(-self.c * np.asarray(r, dtype=float)) - math.exp(-self.c * self.R))


# ======================== SCHEME ========================


class SchemeParams(Frozen):
    method: SolveMethod = SolveMethod.NEWTON
    eps_power: float = Field(default=1.0, gt=0.0)  # eps = h ** eps_power
    stencil: Stencil = Stencil.WIDE  # wide: axes and diagonals; axis: axes only
    dt_factor: float = Field(default=SchemeDefaults.DT_FACTOR, gt=0.0, le=1.0)
    tol: float = Field(default=SchemeDefaults.TOL, gt=0.0)
    max_iters: int = Field(default=SchemeDefaults.MAX_ITERS, gt=0)
    max_explicit_iters: int = Field(default=SchemeDefaults.MAX_EXPLICIT_ITERS, gt=0)
    continuation_steps: int = Field(default=SchemeDefaults.CONTINUATION_STEPS, ge=1)
    monotone_gradient: bool = True
    bracket_tol: float = SchemeDefaults.BRACKET_TOL

    def eps_for(self, h: float) -> float:
        return h ** self.eps_power


class SolveReport(BaseModel):
    method: SolveMethod
    iterations: int = 0
    residual_norm: float = float("inf")
    residual_history: List[float] = []
    dt_history: List[float] = []
    eps_history: List[float] = []
    bracket_margin_history: List[float] = []  # min distance of the iterate to the bracket
    converged: bool = False
    bracket_preserved: bool = True
    bracket_certified: bool = True  # false when a barrier side of the bracket failed its residual check
    bracket_residuals: Dict[str, float] = {}  # side -> minimum barrier residual, barrier sides only


# ======================== CERTIFICATES ========================


class ViscosityRecord(BaseModel):
    point: Tuple[float, ...]
    classification: PointClass
    margin: float
    side: Side
    passed: bool


class ViscosityReport(BaseModel):
    side: Side
    records: List[ViscosityRecord] = []

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    @property
    def min_margin(self) -> float:
        return min((r.margin for r in self.records), default=float("inf"))

    def count(self, cls: PointClass) -> int:
        return sum(1 for r in self.records if r.classification == cls)


class ZeroGradientResult(BaseModel):
    passed: bool
    margin: float
    q: float
    q_min: float


class ComparisonReport(BaseModel):
    margin: float
    node: int
    point: Tuple[float, ...]
    tolerance: float
    passed: bool
    hypothesis: Optional[str] = None  # strict_gap | increasing_gamma


class ModulusFit(BaseModel):
    form: ModulusForm
    radius: float
    constant: float
    exponent: Optional[float] = None  # gamma (holder) or tau (omega)
    region: str = "interior"
    max_violation: float = 0.0
    pair: Tuple[int, int] = (0, 0)
    n_pairs: int = 0
    exhaustive: bool = True


class SandwichResult(BaseModel):
    c: float
    C: float
    passed: bool


class StrongMaxResult(BaseModel):
    interior_min: float
    quotients: List[float]
    threshold: float
    identically_zero: bool
    passed: bool


class CertificateRecord(BaseModel):
    """One line of the certificate report"""
    name: str
    instance_hash: str
    passed: bool
    margin: float
    location: Optional[List[float]] = None
    details: Dict[str, Any] = {}


# ======================== RUN CONFIGURATION ========================


class StrictBlock(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class DomainBlock(StrictBlock):
    kind: DomainKind
    lo: Optional[List[float]] = None
    hi: Optional[List[float]] = None
    center: Optional[List[float]] = None
    radius: Optional[float] = None
    collar_width: Optional[float] = None


class ProblemBlock(StrictBlock):
    domain: DomainBlock
    alpha: float
    beta: float
    lambda_: float = Field(alias="lambda")
    a: float
    A: float
    variant: OperatorVariant = OperatorVariant.PUCCI_PLUS
    b_expr: str = "0"
    f_expr: str = "0"
    phi_expr: str = "0"
    u_exact: Optional[str] = None
    name: str = "problem"


class GridBlock(StrictBlock):
    h: Optional[float] = None
    h_list: List[float] = []


class SolverBlock(StrictBlock):
    method: SolveMethod = SolveMethod.NEWTON
    tol: float = SchemeDefaults.TOL
    max_iters: int = SchemeDefaults.MAX_ITERS
    max_explicit_iters: int = SchemeDefaults.MAX_EXPLICIT_ITERS
    eps_power: float = 1.0
    stencil: Stencil = Stencil.WIDE
    dt_factor: float = SchemeDefaults.DT_FACTOR
    continuation_steps: int = SchemeDefaults.CONTINUATION_STEPS
    monotone_gradient: bool = True


class VerifyBlock(StrictBlock):
    checks: List[CheckName] = []
    r_values: List[float] = [0.5]
    M_level: Optional[float] = None
    instances: int = 50
    seed: Optional[int] = None
    modulus_form: ModulusForm = ModulusForm.LIPSCHITZ
    modulus_exponent: Optional[float] = None
    # zero_gradient fixture: v, x_bar, q, C
    v_expr: Optional[str] = None
    x_bar: List[float] = []
    q: Optional[float] = None
    C: float = 1.0


class OutputBlock(StrictBlock):
    directory: Optional[str] = None
    formats: List[Literal["csv", "report"]] = ["csv", "report"]


class RunConfig(StrictBlock):
    problem: ProblemBlock
    grid: GridBlock = GridBlock()
    solver: SolverBlock = SolverBlock()
    verify: VerifyBlock = VerifyBlock()
    output: OutputBlock = OutputBlock()


class RunReport(BaseModel):
    command: str
    config: Dict[str, Any]
    instance_hash: str
    status: str  # ok | not_converged | certificate_failed
    solve: Optional[SolveReport] = None
    error_vs_oracle: Optional[float] = None
    certificates: List[CertificateRecord] = []
    rates: List[Dict[str, Any]] = []
    artifacts: List[str] = []
    timing_seconds: float = 0.0
