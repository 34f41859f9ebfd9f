"""
Degenerate Dirichlet Toolkit - Main Orchestration System
Turns run configurations into problems, solves, certificate runs, refinement sweeps and
report artifacts
"""

import json
import logging
import math
import time

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import ValidationError

from src.core.config import Config
from src.core.errors import (
    ConfigError,
    DirichletError,
    ExponentOutOfRange,
    FieldEvalError,
    MaxItersExceeded,
    NonRadialData,
    ParseError,
    SpacingTooCoarse,
    UnboundedCoefficient,
)
from src.core.schemas import (
    CertificateRecord,
    CheckName,
    DomainBlock,
    DomainKind,
    EllipticityPair,
    ExponentProfile,
    GridFunction,
    PointClass,
    ProblemBlock,
    ProblemSpec,
    RunConfig,
    RunReport,
    SchemeParams,
    Side,
    SolveReport,
)
from src.core.utils import instance_hash, observed_rates, relative_change, write_csv
from src.modules.barriers import barrier_table, certified_barrier
from src.modules.certify import (
    classical_check,
    comparison_suite,
    modulus_fit,
    sandwich_check,
    strong_max_probe,
    zero_gradient_check,
)
from src.modules.domains import (
    ManufacturedRHS,
    build_grid,
    cartesian_nodes,
    domain_center,
    make_ball,
    make_interval,
    make_rectangle,
    manufacture_rhs,
    points_at_distance,
    sample_points,
    validate_problem,
)
from src.modules.expressions import ScalarField, constant_field
from src.modules.scheme import (
    bracket_from_barriers,
    discrete_residual,
    max_error,
    monotonicity_probe,
    solve,
)

logger = logging.getLogger(__name__)

AUTO = "auto"  # b/f/phi derived from u_exact


def _dotted(loc: Tuple[Any, ...]) -> str:
    return ".".join(str(part) for part in loc) or "<root>"


def _jsonable(value: Any) -> Any:
    """Non-finite floats become null so every report line is strict JSON"""
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return _jsonable(value.item())
    return value


class DirichletEngine:
    """
    Main orchestration system for the Dirichlet toolkit

    Coordinates:
    - Run configuration parsing and problem validation
    - Monotone solves with barrier brackets
    - Certificate runs (barriers, comparison, regularity, positivity, Hopf)
    - Refinement sweeps and report export
    """

    def __init__(self, config: Config = Config()):
        self.config = config

        # Most recent solve, kept for API responses
        self.last_solution: Optional[GridFunction] = None

    # ======================== CONFIGURATION ========================

    def parse_run_config(self, data: Dict[str, Any]) -> RunConfig:
        """
        Validate a configuration tree

        Raises:
            ConfigError: first pydantic error, keyed by its dotted path
        """
        try:
            return RunConfig.model_validate(data)
        except ValidationError as exc:
            first = exc.errors()[0]
            raise ConfigError(_dotted(first["loc"]), first["msg"]) from exc

    def load_run_config(self, path: str) -> RunConfig:
        """Load and validate a TOML run configuration"""
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError("<file>", f"cannot read {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError("<file>", f"invalid TOML in {path}: {exc}") from exc
        run = self.parse_run_config(data)
        logger.info(f"loaded run config {path} ({run.problem.name})")
        return run

    def build_domain(self, block: DomainBlock):
        try:
            if block.kind == DomainKind.INTERVAL:
                return make_interval(block.lo[0], block.hi[0], block.collar_width)
            if block.kind == DomainKind.RECTANGLE:
                return make_rectangle(block.lo, block.hi, block.collar_width)
            return make_ball(block.center, block.radius, block.collar_width)
        except (TypeError, IndexError) as exc:
            raise ConfigError("problem.domain", f"missing {block.kind.value} parameters") from exc
        except ValueError as exc:
            raise ConfigError("problem.domain", str(exc)) from exc

    def _field(self, key: str, src: str, variables) -> ScalarField:
        try:
            return ScalarField.from_source(src, variables, name=key.removesuffix("_expr"))
        except ParseError as exc:
            raise ConfigError(f"problem.{key}", str(exc)) from exc

    def build_problem(self, block: ProblemBlock, h: Optional[float] = None) -> ProblemSpec:
        """
        ProblemSpec from a problem block, validated

        "auto" for f_expr or phi_expr derives them from u_exact (manufactured data).

        Raises:
            ConfigError: unparsable expressions, invalid domain, out-of-range exponents
        """
        dom = self.build_domain(block.domain)
        variables = dom.variables
        u_exact = self._field("u_exact", block.u_exact, variables) if block.u_exact else None
        for key in ("f_expr", "phi_expr"):
            if getattr(block, key) == AUTO and u_exact is None:
                raise ConfigError(f"problem.{key}", "'auto' needs problem.u_exact")

        prob = ProblemSpec(
            domain=dom,
            exponents=ExponentProfile(alpha=block.alpha, beta=block.beta, lambda_=block.lambda_),
            pair=EllipticityPair(a=block.a, A=block.A),
            variant=block.variant,
            b_field=self._field("b_expr", block.b_expr, variables),
            f_field=(
                constant_field(0.0, variables, "f")
                if block.f_expr == AUTO
                else self._field("f_expr", block.f_expr, variables)
            ),
            phi_field=(
                ScalarField(u_exact.expr, variables, "phi")
                if block.phi_expr == AUTO
                else self._field("phi_expr", block.phi_expr, variables)
            ),
            name=block.name,
        )
        try:
            if block.f_expr == AUTO:
                prob = prob.with_fields(f_field=manufacture_rhs(u_exact, prob).field)
            return validate_problem(prob, h)
        except ExponentOutOfRange as exc:
            raise ConfigError(f"problem.{exc.which}", str(exc)) from exc
        except (FieldEvalError, UnboundedCoefficient, NonRadialData) as exc:
            raise ConfigError("problem", str(exc)) from exc

    def exact_solution(self, run: RunConfig) -> Optional[ScalarField]:
        if not run.problem.u_exact:
            return None
        dom = self.build_domain(run.problem.domain)
        return self._field("u_exact", run.problem.u_exact, dom.variables)

    def scheme_params(self, run: RunConfig) -> SchemeParams:
        s = run.solver
        try:
            return SchemeParams(
                method=s.method,
                eps_power=s.eps_power,
                stencil=s.stencil,
                dt_factor=s.dt_factor,
                tol=s.tol,
                max_iters=s.max_iters,
                max_explicit_iters=s.max_explicit_iters,
                continuation_steps=s.continuation_steps,
                monotone_gradient=s.monotone_gradient,
            )
        except ValidationError as exc:
            first = exc.errors()[0]
            raise ConfigError(f"solver.{_dotted(first['loc'])}", first["msg"]) from exc

    def build_grid(self, prob: ProblemSpec, h: Optional[float], key: str = "grid.h"):
        if h is None:
            raise ConfigError(key, "grid spacing required")
        try:
            return build_grid(prob.domain, h)
        except (SpacingTooCoarse, ValueError) as exc:
            raise ConfigError(key, str(exc)) from exc

    def run_hash(self, run: RunConfig) -> str:
        payload = run.model_dump(by_alias=True, mode="json", exclude={"output"})
        return instance_hash(payload)

    # ======================== COMMANDS ========================

    def run_solve(self, run: RunConfig, out_dir: Optional[str] = None) -> RunReport:
        """Solve one instance and export the solution, residual history and report"""
        started = time.perf_counter()
        out = self._out_dir(run, out_dir)
        report = self._new_report("solve", run)

        logger.info("Step 1: building problem and grid...")
        prob = self.build_problem(run.problem, run.grid.h)
        grid = self.build_grid(prob, run.grid.h)
        params = self.scheme_params(run)

        logger.info(f"Step 2: solving on {grid.n_nodes} nodes...")
        try:
            u_h, solve_report = solve(prob, grid, params, config=self.config)
        except MaxItersExceeded as exc:
            logger.warning(str(exc))
            report.status = "not_converged"
            report.solve = exc.report
            u_h = None
        else:
            report.solve = solve_report
        self.last_solution = u_h

        if u_h is not None:
            exact = self.exact_solution(run)
            if exact is not None:
                report.error_vs_oracle = max_error(u_h, exact)
                logger.info(f"   error vs oracle {report.error_vs_oracle:.3e}")

        logger.info("Step 3: exporting artifacts...")
        if u_h is not None and "csv" in run.output.formats:
            residual = discrete_residual(u_h, prob, params)
            report.artifacts.append(self.export_solution_csv(u_h, residual, out).name)
        if report.solve is not None and "csv" in run.output.formats:
            report.artifacts.append(self.export_history_csv(report.solve, out).name)
        return self._finish(report, run, out, started)

    def run_verify(
        self, run: RunConfig, out_dir: Optional[str] = None, seed: Optional[int] = None
    ) -> RunReport:
        """Run every requested certificate; status certificate_failed if any record fails"""
        started = time.perf_counter()
        out = self._out_dir(run, out_dir)
        report = self._new_report("verify", run)
        checks = run.verify.checks
        if not checks:
            raise ConfigError("verify.checks", "request at least one check")
        seed = seed if seed is not None else run.verify.seed
        seed = self.config.certify.DEFAULT_SEED if seed is None else seed

        logger.info("Step 1: building problem...")
        prob = self.build_problem(run.problem, run.grid.h)
        params = self.scheme_params(run)
        digest = report.instance_hash
        context = _VerifyContext(self, run, prob, params, digest, out)

        for step, check in enumerate(checks, start=2):
            logger.info(f"Step {step}: {check.value}...")
            try:
                records = context.run(check, seed)
            except ConfigError:
                raise
            except DirichletError as exc:
                logger.warning(f"{check.value} failed: {exc}")
                records = [
                    CertificateRecord(
                        name=check.value,
                        instance_hash=digest,
                        passed=False,
                        margin=math.nan,
                        details={"error": f"{type(exc).__name__}: {exc}"},
                    )
                ]
            for rec in records:
                logger.info(f"   {rec.name}: {'pass' if rec.passed else 'FAIL'} (margin {rec.margin:.3g})")
            report.certificates.extend(records)

        report.solve = context.solve_report
        report.artifacts.extend(context.artifacts)
        if not all(r.passed for r in report.certificates):
            report.status = "certificate_failed"
        return self._finish(report, run, out, started)

    def run_sweep(self, run: RunConfig, out_dir: Optional[str] = None) -> RunReport:
        """Refinement sweep: oracle error (or bracket width), observed rates and interior Lipschitz fits"""
        started = time.perf_counter()
        out = self._out_dir(run, out_dir)
        report = self._new_report("sweep", run)
        hs = sorted(run.grid.h_list, reverse=True)
        if len(hs) < 3:
            raise ConfigError("grid.h_list", "a sweep needs at least three spacings")

        prob = self.build_problem(run.problem, hs[-1])
        params = self.scheme_params(run)
        exact = self.exact_solution(run)
        r = run.verify.r_values[0] if run.verify.r_values else 0.5
        rows: List[Dict[str, Any]] = []

        for step, h in enumerate(hs, start=1):
            logger.info(f"Step {step}: h={h:.5g}...")
            grid = self.build_grid(prob, h, "grid.h_list")
            try:
                u_h, solve_report = solve(prob, grid, params, config=self.config)
            except MaxItersExceeded as exc:
                logger.warning(str(exc))
                report.status = "not_converged"
                rows.append({"h": grid.h, "error": None, "lipschitz": None, "iterations": None})
                continue
            if exact is not None:
                error = max_error(u_h, exact)
            else:
                bracket = bracket_from_barriers(prob, grid, config=self.config)
                error = float(np.max(bracket.upper.values - bracket.lower.values))
            fit = modulus_fit(u_h, r, config=self.config)
            rows.append(
                {
                    "h": grid.h,
                    "error": error,
                    "lipschitz": fit.constant,
                    "iterations": solve_report.iterations,
                }
            )

        valid = [row for row in rows if row["error"] is not None]
        rates = observed_rates([row["h"] for row in valid], [row["error"] for row in valid])
        for row, rate in zip(valid, rates):
            row["rate"] = rate
        for row in rows:
            row.setdefault("rate", None)
        previous = None
        for row in rows:
            # stability of the fitted interior Lipschitz constant between consecutive levels
            lip = row["lipschitz"]
            row["lipschitz_change"] = (
                relative_change(previous, lip) if previous is not None and lip is not None else None
            )
            previous = lip if lip is not None else previous
        report.rates = rows
        if "csv" in run.output.formats:
            path = write_csv(
                out / self.config.output.SWEEP_CSV,
                ["h", "error", "rate", "lipschitz", "lipschitz_change", "iterations"],
                [[row[k] for k in ("h", "error", "rate", "lipschitz", "lipschitz_change", "iterations")] for row in rows],
                self.config.output.FLOAT_FORMAT,
            )
            report.artifacts.append(path.name)
        return self._finish(report, run, out, started)

    def run_manufacture(
        self, u_expr: str, run: RunConfig, out_dir: Optional[str] = None
    ) -> Tuple[ManufacturedRHS, RunReport]:
        """Manufactured f for u_expr under the configured operator and coefficients"""
        started = time.perf_counter()
        out = self._out_dir(run, out_dir)
        report = self._new_report("manufacture", run)
        block = run.problem.model_copy(update={"f_expr": "0", "phi_expr": "0", "u_exact": None})
        prob = self.build_problem(block)
        try:
            rhs = manufacture_rhs(u_expr, prob)
        except ParseError as exc:
            raise ConfigError("u_expr", str(exc)) from exc
        report.certificates.append(
            CertificateRecord(
                name="manufacture",
                instance_hash=report.instance_hash,
                passed=True,
                margin=0.0,
                details={
                    "u": u_expr,
                    "f": str(rhs.field),
                    "singular_points": [list(p) for p in rhs.singular_points],
                    "kinked": rhs.kinked,
                },
            )
        )
        return rhs, self._finish(report, run, out, started)

    # ======================== EXPORT ========================

    def _out_dir(self, run: RunConfig, out_dir: Optional[str]) -> Path:
        directory = out_dir or run.output.directory or self.config.output.default_directory()
        path = Path(directory)
        path.mkdir(parents=True, exist_ok=True)
        return path

    def _new_report(self, command: str, run: RunConfig) -> RunReport:
        return RunReport(
            command=command,
            config=run.model_dump(by_alias=True, mode="json"),
            instance_hash=self.run_hash(run),
            status="ok",
        )

    def _finish(self, report: RunReport, run: RunConfig, out: Path, started: float) -> RunReport:
        report.timing_seconds = time.perf_counter() - started
        if "report" in run.output.formats:
            report.artifacts.append(self.config.output.REPORT_FILE)
            report.artifacts.append(self.config.output.SUMMARY_FILE)
            self.export_report_jsonl(report, out / self.config.output.REPORT_FILE)
            self.export_report_markdown(report, out / self.config.output.SUMMARY_FILE)
        logger.info(f"{report.command} finished: {report.status} in {report.timing_seconds:.2f}s")
        return report

    def export_solution_csv(self, u_h: GridFunction, residual: GridFunction, out: Path) -> Path:
        """Columns: node coordinates (r for balls), u, residual"""
        grid = u_h.grid
        if grid.radial:
            header, coords = ["r"], grid.coords
        else:
            header, coords = list(grid.domain.variables), cartesian_nodes(grid)
        rows = [list(c) + [float(v), float(q)] for c, v, q in zip(coords.tolist(), u_h.values, residual.values)]
        return write_csv(
            out / self.config.output.SOLUTION_CSV, header + ["u", "residual"], rows, self.config.output.FLOAT_FORMAT
        )

    def export_history_csv(self, solve_report: SolveReport, out: Path) -> Path:
        """Residual norm per recorded iteration with the bracket margin"""
        rows = [
            [k, norm, margin]
            for k, (norm, margin) in enumerate(
                zip(solve_report.residual_history, solve_report.bracket_margin_history)
            )
        ]
        return write_csv(
            out / self.config.output.RESIDUAL_CSV,
            ["record", "residual_norm", "bracket_margin"],
            rows,
            self.config.output.FLOAT_FORMAT,
        )

    def export_report_jsonl(self, report: RunReport, filepath: Path) -> None:
        """
        One JSON object per line, keys sorted:
        run, solve, oracle, certificate*, rate*, artifacts, timing (last, the only
        non-deterministic line)
        """
        lines: List[Dict[str, Any]] = [
            {
                "record": "run",
                "command": report.command,
                "instance_hash": report.instance_hash,
                "status": report.status,
                "config": report.config,
            }
        ]
        if report.solve is not None:
            lines.append({"record": "solve", **report.solve.model_dump(mode="json")})
        if report.error_vs_oracle is not None:
            lines.append({"record": "oracle", "error_vs_oracle": report.error_vs_oracle})
        for cert in report.certificates:
            lines.append({"record": "certificate", **cert.model_dump(mode="json")})
        for row in report.rates:
            lines.append({"record": "rate", **row})
        lines.append({"record": "artifacts", "files": report.artifacts})
        lines.append({"record": "timing", "seconds": report.timing_seconds})
        with open(filepath, "w") as f:
            for line in lines:
                f.write(json.dumps(_jsonable(line), sort_keys=True) + "\n")
        logger.debug(f"exported report to {filepath}")

    def export_report_markdown(self, report: RunReport, filepath: Path) -> None:
        """Export report as formatted markdown"""
        md = []
        md.append(f"# {report.command.upper()} - {report.config['problem'].get('name', 'problem')}")
        md.append("")
        md.append(f"- **Status**: {report.status}")
        md.append(f"- **Instance hash**: `{report.instance_hash}`")
        if report.solve is not None:
            s = report.solve
            md.append(f"- **Method**: {s.method.value}")
            md.append(f"- **Iterations**: {s.iterations}")
            md.append(f"- **Final residual**: {s.residual_norm:.3e}")
            md.append(f"- **Converged**: {s.converged}")
        if report.error_vs_oracle is not None:
            md.append(f"- **Error vs oracle**: {report.error_vs_oracle:.3e}")
        md.append("")

        if report.certificates:
            md.append("## Certificates")
            md.append("")
            md.append("| check | passed | margin |")
            md.append("|---|---|---|")
            for cert in report.certificates:
                md.append(f"| {cert.name} | {'yes' if cert.passed else 'NO'} | {cert.margin:.4g} |")
            md.append("")

        if report.rates:
            md.append("## Refinement")
            md.append("")
            md.append("| h | error | rate | lipschitz |")
            md.append("|---|---|---|---|")
            for row in report.rates:
                cells = [row.get(k) for k in ("h", "error", "rate", "lipschitz")]
                md.append("| " + " | ".join("-" if v is None else f"{v:.4g}" for v in cells) + " |")
            md.append("")

        if report.artifacts:
            md.append("## Artifacts")
            md.append("")
            md.extend(f"- {name}" for name in report.artifacts)
            md.append("")

        with open(filepath, "w") as f:
            f.write("\n".join(md))


# ======================== VERIFY CHECKS ========================


class _VerifyContext:
    """Shared state of one verify run: the problem, a lazily solved u_h and written files"""

    def __init__(self, engine: DirichletEngine, run: RunConfig, prob: ProblemSpec, params, digest: str, out: Path):
        self.engine = engine
        self.config = engine.config
        self.run_config = run
        self.prob = prob
        self.params = params
        self.digest = digest
        self.out = out
        self.artifacts: List[str] = []
        self.solve_report: Optional[SolveReport] = None
        self._grid = None
        self._solution: Optional[GridFunction] = None

    @property
    def grid(self):
        if self._grid is None:
            self._grid = self.engine.build_grid(self.prob, self.run_config.grid.h)
        return self._grid

    def solution(self) -> GridFunction:
        if self._solution is None:
            self._solution, self.solve_report = solve(self.prob, self.grid, self.params, config=self.config)
        return self._solution

    def record(self, name: str, passed: bool, margin: float, location=None, **details) -> CertificateRecord:
        return CertificateRecord(
            name=name,
            instance_hash=self.digest,
            passed=bool(passed),
            margin=float(margin),
            location=None if location is None else [float(c) for c in location],
            details=details,
        )

    def run(self, check: CheckName, seed: int) -> List[CertificateRecord]:
        handler = getattr(self, f"check_{check.value}")
        if check == CheckName.COMPARISON_SUITE:
            return handler(seed)
        return handler()

    def check_barrier(self) -> List[CertificateRecord]:
        prob = self.prob
        level = self.run_config.verify.M_level
        if level is None:
            level = max(prob.f_sup or 0.0, 1.0)
        records = []
        for side in (Side.SUPER, Side.SUB):
            spec = certified_barrier(prob, level, side, self.config)
            interface = spec.constants.kappa / spec.constants.C
            d = np.linspace(0.0, min(interface, prob.domain.inradius), self.config.barriers.SWEEP_POINTS)
            report = classical_check(spec, prob, points_at_distance(prob.domain, d), side, config=self.config)
            floor = self.config.barriers.CERTIFY_MARGIN * level
            worst = min(report.records, key=lambda r: r.margin)
            records.append(
                self.record(
                    f"barrier_{side.value}",
                    report.min_margin >= floor,
                    report.min_margin - floor,
                    worst.point,
                    M_level=level,
                    C=spec.constants.C,
                    kappa=spec.constants.kappa,
                    rescale_eps=spec.rescale_eps,
                    certified=spec.certified,
                )
            )
            if side == Side.SUPER and "csv" in self.run_config.output.formats:
                header, rows = barrier_table(spec, prob)
                path = write_csv(self.out / self.config.output.BARRIER_CSV, header, rows, self.config.output.FLOAT_FORMAT)
                self.artifacts.append(path.name)
        return records

    def check_classical(self) -> List[CertificateRecord]:
        exact = self.engine.exact_solution(self.run_config)
        if exact is None:
            raise ConfigError("problem.u_exact", "classical check needs an exact solution")
        pts = sample_points(self.prob.domain, 201)
        h = self.run_config.grid.h or 1e-2
        records = []
        for side in (Side.SUPER, Side.SUB):
            report = classical_check(exact, self.prob, pts, side, h=h, tol=1e-7, config=self.config)
            worst = min(report.records, key=lambda r: r.margin)
            records.append(
                self.record(
                    f"classical_{side.value}",
                    report.passed,
                    report.min_margin,
                    worst.point,
                    counts={cls.value: report.count(cls) for cls in PointClass},
                )
            )
        return records

    def check_zero_gradient(self) -> List[CertificateRecord]:
        v = self.run_config.verify
        if v.v_expr is None or v.q is None:
            raise ConfigError("verify.v_expr", "zero_gradient needs verify.v_expr and verify.q")
        field = self.engine._field("v_expr", v.v_expr, self.prob.domain.variables)
        x_bar = v.x_bar or list(domain_center(self.prob.domain))
        result = zero_gradient_check(field, self.prob, x_bar, v.q, v.C, config=self.config)
        return [self.record("zero_gradient", result.passed, result.margin, x_bar, q=result.q, q_min=result.q_min)]

    def check_monotonicity(self) -> List[CertificateRecord]:
        mono = monotonicity_probe(self.prob, self.grid, self.params, config=self.config)
        return [
            self.record(
                "monotonicity",
                mono.passed,
                -mono.neighbour_increase,
                neighbour_increase=mono.neighbour_increase,
                self_increase=mono.self_increase,
                nodes=mono.nodes,
            )
        ]

    def check_comparison_suite(self, seed: int) -> List[CertificateRecord]:
        return comparison_suite(seed, self.run_config.verify.instances, self.params, self.config)

    def check_uniqueness(self) -> List[CertificateRecord]:
        bracket = bracket_from_barriers(self.prob, self.grid, config=self.config)
        upper, _ = solve(self.prob, self.grid, self.params, bracket=bracket, start="upper", config=self.config)
        lower, _ = solve(self.prob, self.grid, self.params, bracket=bracket, start="lower", config=self.config)
        gap = float(np.max(np.abs(upper.values - lower.values)))
        return [self.record("uniqueness", gap <= 1e-6, gap)]

    def check_sandwich(self) -> List[CertificateRecord]:
        result = sandwich_check(self.solution(), config=self.config)
        return [self.record("sandwich", result.passed, result.c, c=result.c, C=result.C)]

    def check_strong_max(self) -> List[CertificateRecord]:
        result = strong_max_probe(self.solution(), self.prob, self.config)
        low = min(result.quotients, default=math.inf)
        margin = result.interior_min if not result.quotients else min(result.interior_min, low - result.threshold)
        return [
            self.record(
                "strong_max",
                result.passed,
                margin,
                interior_min=result.interior_min,
                quotients=result.quotients,
                threshold=result.threshold,
                identically_zero=result.identically_zero,
            )
        ]

    def check_modulus(self) -> List[CertificateRecord]:
        v = self.run_config.verify
        u_h = self.solution()
        records = []
        for r in v.r_values:
            fit = modulus_fit(u_h, r, v.modulus_form, v.modulus_exponent, config=self.config)
            records.append(
                self.record(
                    f"modulus_r{r:g}",
                    math.isfinite(fit.constant) and fit.max_violation <= 0.0,
                    fit.constant,
                    form=fit.form.value,
                    exponent=fit.exponent,
                    pair=list(fit.pair),
                    n_pairs=fit.n_pairs,
                    exhaustive=fit.exhaustive,
                )
            )
        return records

