"""
Shared fixtures: canonical problems, grids and run configurations
"""

from pathlib import Path
from typing import Callable, Optional

import pytest

from src.core.schemas import Domain, EllipticityPair, ExponentProfile, OperatorVariant, ProblemSpec
from src.modules.domains import make_interval, validate_problem
from src.modules.expressions import ScalarField

ROOT = Path(__file__).resolve().parents[1]


def build_problem(
    alpha: float = 0.0,
    beta: float = 1.0,
    lam: float = 1.0,
    a: float = 1.0,
    A: float = 2.0,
    b: str = "1",
    f: str = "1",
    phi: str = "0",
    domain: Optional[Domain] = None,
    variant: OperatorVariant = OperatorVariant.PUCCI_PLUS,
    name: str = "test",
) -> ProblemSpec:
    dom = domain if domain is not None else make_interval(-1.0, 1.0)
    variables = dom.variables
    prob = ProblemSpec(
        domain=dom,
        exponents=ExponentProfile(alpha=alpha, beta=beta, lambda_=lam),
        pair=EllipticityPair(a=a, A=A),
        variant=variant,
        b_field=ScalarField.from_source(b, variables, "b"),
        f_field=ScalarField.from_source(f, variables, "f"),
        phi_field=ScalarField.from_source(phi, variables, "phi"),
        name=name,
    )
    return validate_problem(prob)


@pytest.fixture
def make_problem() -> Callable[..., ProblemSpec]:
    """Factory for validated problems; defaults are the sandwich instance on (-1, 1)"""
    return build_problem


@pytest.fixture
def sandwich_problem() -> ProblemSpec:
    """f = 1, phi = 0, alpha = 0, beta = 1, b = 1, lambda = 1 on (-1, 1)"""
    return build_problem(name="sandwich")


@pytest.fixture
def configs_dir() -> Path:
    return ROOT / "data" / "configs"


@pytest.fixture
def write_config(tmp_path) -> Callable[[str, str], str]:
    """Write TOML text under tmp_path and return the path"""

    def _write(text: str, name: str = "run.toml") -> str:
        path = tmp_path / name
        path.write_text(text)
        return str(path)

    return _write


INTERVAL_TOML = """
[problem]
alpha = {alpha}
beta = {beta}
lambda = 1.0
a = 1.0
A = 2.0
b_expr = "{b}"
f_expr = "{f}"
phi_expr = "{phi}"
{extra}

[problem.domain]
kind = "interval"
lo = [-1.0]
hi = [1.0]

[grid]
h = {h}
"""


@pytest.fixture
def interval_toml() -> Callable[..., str]:
    """TOML text for an interval problem on (-1, 1)"""

    def _text(alpha=0.0, beta=1.0, b="1", f="1", phi="0", h=0.0625, extra="", tail="") -> str:
        return INTERVAL_TOML.format(alpha=alpha, beta=beta, b=b, f=f, phi=phi, h=h, extra=extra) + tail

    return _text
