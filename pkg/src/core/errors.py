"""
Degenerate Dirichlet Toolkit - Error Types
Exception hierarchy shared by the solver, the barrier builders and the certifier
"""

from typing import Any, Iterable, Optional


class DirichletError(Exception):
    """Root of every toolkit error"""


class KinkWarning(UserWarning):
    """Derivative taken through abs/min/max/sign: valid away from kinks only"""


# ======================== OPERATOR / FIELD EVALUATION ========================


class SingularGradient(DirichletError):
    """|p| = 0 with eps = 0 and a negative gradient exponent"""


class FieldEvalError(DirichletError):
    """A coefficient field is undefined (nan/inf) at an evaluation point"""

    def __init__(self, field_name: str, point: Any):
        self.field_name = field_name
        self.point = point
        super().__init__(f"field '{field_name}' undefined at {point}")


class ParseError(DirichletError):
    """Malformed expression source"""

    def __init__(self, message: str, position: int, expected: Iterable[str] = ()):
        self.position = position
        self.expected = sorted(set(expected))
        detail = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{message} at position {position}{detail}")


# ======================== DOMAINS / PROBLEMS ========================


class OutsideDomain(DirichletError):
    """Point not in the closure of the domain"""


class SpacingTooCoarse(DirichletError):
    """Grid spacing not below the collar width"""


class ExponentOutOfRange(DirichletError):
    """An exponent or structural constant violates its admissible range"""

    def __init__(self, which: str, value: float, allowed: str):
        self.which = which
        self.value = value
        self.allowed = allowed
        super().__init__(f"{which}={value} outside {allowed}")


class UnboundedCoefficient(DirichletError):
    """Coefficient field not bounded on the sample sweep"""


class NonRadialData(DirichletError):
    """Ball problems are solved radially: b, f and phi must be radial"""


# ======================== BARRIERS ========================


class CriticalBeta(DirichletError):
    """beta = alpha + 2 with a first-order bound too large for the direct construction"""


class CrownOutsideDomain(DirichletError):
    """Hopf crown not contained in the domain"""


class HopfBarrierInfeasible(DirichletError):
    """No (c, delta) found making the radial profile a certified subsolution"""


class DeltaTooLarge(DirichletError):
    """Boundary barrier collar width violates delta < (1 - r)/9"""


class NonAffineBoundaryDatum(DirichletError):
    """Boundary barrier needs an affine boundary datum"""


# ======================== SCHEME ========================


class MaxItersExceeded(DirichletError):
    """Solver stopped before the residual reached tol"""

    def __init__(self, message: str, report: Optional[Any] = None):
        self.report = report
        super().__init__(message)


class BracketViolated(DirichletError):
    """An iterate left the sub/super bracket: the update map is not monotone"""


# ======================== CERTIFY ========================


class QTooSmall(DirichletError):
    def __init__(self, q: float, q_min: float):
        self.q = q
        self.q_min = q_min
        super().__init__(f"q={q} below (alpha+2)/(alpha+1)={q_min}")


class NotStrictMinimum(DirichletError):
    """x_bar is not a strict local minimum of v + C|x - x_bar|^q"""


class BoundaryOrderViolated(DirichletError):
    """u_h > v_h somewhere on the boundary"""


class SignViolation(DirichletError):
    """Negative discrete solution for nonnegative data"""


# ======================== CONFIG ========================


class ConfigError(DirichletError):
    """Invalid run configuration; key is the dotted path of the offending entry"""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")
