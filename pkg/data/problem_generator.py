"""
Generate the bundled run configurations for Degenerate Dirichlet Toolkit
"""

import os
import sys
from pathlib import Path
from typing import Any, Dict, List

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.core.schemas import RunConfig

SWEEP_H = [2.0 ** -k for k in range(4, 9)]


def _interval(lo: float = -1.0, hi: float = 1.0) -> Dict[str, Any]:
    return {"kind": "interval", "lo": [lo], "hi": [hi]}


def _manufactured(name: str, alpha: float, beta: float, u_exact: str) -> Dict[str, Any]:
    """1D manufactured instance on (-1, 1), a=1, A=2, b=1, lambda=1"""
    return {
        "problem": {
            "name": name,
            "domain": _interval(),
            "alpha": alpha,
            "beta": beta,
            "lambda": 1.0,
            "a": 1.0,
            "A": 2.0,
            "b_expr": "1",
            "f_expr": "auto",
            "phi_expr": "auto",
            "u_exact": u_exact,
        },
        "grid": {"h": 0.0625, "h_list": SWEEP_H},
        "verify": {"checks": ["classical", "uniqueness", "modulus"], "r_values": [0.5]},
    }


def generate_fixtures() -> Dict[str, RunConfig]:
    """Every bundled fixture, validated"""

    fixtures: Dict[str, Dict[str, Any]] = {}

    # ==================== MANUFACTURED 1D ====================

    fixtures["manufactured_uniform"] = _manufactured("manufactured_uniform", 0.0, 1.0, "cos(pi*x/2)")
    fixtures["manufactured_degenerate"] = _manufactured(
        "manufactured_degenerate", 1.0, 2.0, "x + sin(pi*x/2)/4"
    )
    fixtures["manufactured_singular"] = _manufactured("manufactured_singular", -0.5, 1.0, "x + x^3/3")

    # ==================== BARRIERS ====================

    fixtures["barrier_verification"] = {
        "problem": {
            "name": "barrier_verification",
            "domain": _interval(0.0, 1.0),
            "alpha": 0.5,
            "beta": 1.0,
            "lambda": 1.0,
            "a": 1.0,
            "A": 2.0,
            "b_expr": "1",
            "f_expr": "1",
            "phi_expr": "0",
        },
        "grid": {"h": 0.03125},
        "verify": {"checks": ["barrier"], "M_level": 2.0},
    }

    fixtures["barrier_critical"] = {
        "problem": {
            "name": "barrier_critical",
            "domain": _interval(0.0, 1.0),
            "alpha": 0.0,
            "beta": 2.0,
            "lambda": 1.0,
            "a": 1.0,
            "A": 1.0,
            "b_expr": "1",
            "f_expr": "1",
            "phi_expr": "0",
        },
        "grid": {"h": 0.03125},
        "verify": {"checks": ["barrier"], "M_level": 2.0},
    }

    # ==================== COMPARISON ====================

    suite_problem = {
        "name": "comparison_suite",
        "domain": _interval(),
        "alpha": 0.0,
        "beta": 1.0,
        "lambda": 1.0,
        "a": 1.0,
        "A": 2.0,
        "b_expr": "1",
        "f_expr": "1",
        "phi_expr": "0",
    }
    fixtures["comparison_suite"] = {
        "problem": suite_problem,
        "grid": {"h": 0.03125},
        "verify": {"checks": ["monotonicity", "comparison_suite"], "instances": 50, "seed": 7},
    }
    fixtures["comparison_centered"] = {
        "problem": {**suite_problem, "name": "comparison_centered"},
        "grid": {"h": 0.03125},
        "solver": {"monotone_gradient": False},
        "verify": {"checks": ["comparison_suite"], "instances": 50, "seed": 7},
    }

    # ==================== POSITIVITY / HOPF ====================

    fixtures["sandwich_hopf"] = {
        "problem": {
            "name": "sandwich_hopf",
            "domain": _interval(),
            "alpha": 0.0,
            "beta": 1.0,
            "lambda": 1.0,
            "a": 1.0,
            "A": 2.0,
            "b_expr": "1",
            "f_expr": "1",
            "phi_expr": "0",
        },
        "grid": {"h": 0.015625, "h_list": [0.0625, 0.03125, 0.015625]},
        "verify": {"checks": ["sandwich", "strong_max", "modulus"], "r_values": [0.5]},
    }

    # ==================== SINGULAR CASE ====================

    fixtures["zero_gradient"] = {
        "problem": {
            "name": "zero_gradient",
            "domain": _interval(),
            "alpha": -0.5,
            "beta": 1.0,
            "lambda": 1.0,
            "a": 1.0,
            "A": 2.0,
            "b_expr": "0",
            "f_expr": "-1",
            "phi_expr": "0",
        },
        "grid": {"h": 0.0625},
        "verify": {"checks": ["zero_gradient"], "v_expr": "x^4", "x_bar": [0.0], "q": 3.0, "C": 1.0},
    }

    return {name: RunConfig.model_validate(tree) for name, tree in fixtures.items()}


# ======================== TOML OUTPUT ========================


def _toml_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise TypeError(f"no TOML form for {type(value).__name__}")


def _toml_table(prefix: str, table: Dict[str, Any], out: List[str]) -> None:
    scalars = {k: v for k, v in table.items() if not isinstance(v, dict) and v is not None}
    nested = {k: v for k, v in table.items() if isinstance(v, dict)}
    if scalars or not nested:
        out.append(f"[{prefix}]")
        out.extend(f"{k} = {_toml_value(v)}" for k, v in scalars.items())
        out.append("")
    for key, sub in nested.items():
        _toml_table(f"{prefix}.{key}", sub, out)


def to_toml(run: RunConfig) -> str:
    """Only fields that differ from the defaults are written"""
    tree = run.model_dump(by_alias=True, mode="json", exclude_defaults=True)
    out: List[str] = []
    for section in ("problem", "grid", "solver", "verify", "output"):
        if tree.get(section):
            _toml_table(section, tree[section], out)
    return "\n".join(out)


def save_fixtures(fixtures: Dict[str, RunConfig], directory: str) -> None:
    """Write one <name>.toml per fixture"""
    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)
    for name, run in fixtures.items():
        (path / f"{name}.toml").write_text(to_toml(run))
    print(f"Saved {len(fixtures)} fixtures to {path}")


if __name__ == "__main__":
    save_fixtures(generate_fixtures(), os.path.join(os.path.dirname(os.path.abspath(__file__)), "configs"))
