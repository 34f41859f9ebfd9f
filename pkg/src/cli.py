"""
Degenerate Dirichlet Toolkit - Command Line Interface
solve / verify / sweep / manufacture over TOML run configurations

Exit codes: 0 success, 2 configuration or validation error, 3 solver non-convergence,
4 failed certificate.
"""

import argparse
import logging
import sys
from typing import List, Optional

from src.core.config import Config
from src.core.errors import BracketViolated, ConfigError, DirichletError, MaxItersExceeded
from src.core.schemas import RunConfig, RunReport
from src.engine import DirichletEngine

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOT_CONVERGED = 3
EXIT_CERTIFICATE = 4

_STATUS_CODES = {
    "ok": EXIT_OK,
    "not_converged": EXIT_NOT_CONVERGED,
    "certificate_failed": EXIT_CERTIFICATE,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--out",
        default=None,
        help=f"output directory (default: ${Config.output.ENV_VAR} or '{Config.output.DIRECTORY}')",
    )
    common.add_argument("--seed", type=int, default=None, help="seed for randomised suites")
    common.add_argument(
        "--format", choices=["csv", "report"], default=None, help="write only this artifact kind"
    )

    parser = argparse.ArgumentParser(
        prog="dirichlet",
        description="Monotone solver and certificate harness for degenerate/singular Dirichlet problems",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="solve one instance")
    p.add_argument("config")
    p = sub.add_parser("verify", parents=[common], help="run the configured certificates")
    p.add_argument("config")
    p = sub.add_parser("sweep", parents=[common], help="refinement sweep over grid.h_list")
    p.add_argument("config")
    p = sub.add_parser("manufacture", parents=[common], help="right-hand side for a chosen solution")
    p.add_argument("u_expr")
    p.add_argument("config")
    return parser


def _with_format(run: RunConfig, fmt: Optional[str]) -> RunConfig:
    if fmt is None:
        return run
    return run.model_copy(update={"output": run.output.model_copy(update={"formats": [fmt]})})


def _summary(report: RunReport) -> str:
    parts = [f"{report.command}: {report.status}"]
    if report.solve is not None:
        parts.append(f"iterations={report.solve.iterations}")
        parts.append(f"residual={report.solve.residual_norm:.3e}")
    if report.error_vs_oracle is not None:
        parts.append(f"error_vs_oracle={report.error_vs_oracle:.3e}")
    if report.certificates:
        passed = sum(c.passed for c in report.certificates)
        parts.append(f"certificates={passed}/{len(report.certificates)}")
    return " ".join(parts)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    engine = DirichletEngine()

    try:
        run = _with_format(engine.load_run_config(args.config), args.format)
        if args.command == "solve":
            report = engine.run_solve(run, args.out)
        elif args.command == "verify":
            report = engine.run_verify(run, args.out, seed=args.seed)
        elif args.command == "sweep":
            report = engine.run_sweep(run, args.out)
            for row in report.rates:
                rate = "-" if row.get("rate") is None else f"{row['rate']:.3f}"
                error = "-" if row.get("error") is None else f"{row['error']:.3e}"
                print(f"h={row['h']:.6g} error={error} rate={rate}")
        else:
            rhs, report = engine.run_manufacture(args.u_expr, run, args.out)
            print(f"f = {rhs.field}")
            for point in rhs.singular_points:
                print(f"singular: {', '.join(f'{c:.6g}' for c in point)}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MaxItersExceeded, BracketViolated) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except DirichletError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    print(_summary(report))
    return _STATUS_CODES.get(report.status, EXIT_CONFIG)


if __name__ == "__main__":
    sys.exit(main())
