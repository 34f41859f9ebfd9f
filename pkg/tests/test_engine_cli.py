import json

import pytest

from data.problem_generator import generate_fixtures, save_fixtures, to_toml
from src.cli import EXIT_CERTIFICATE, EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_OK, main
from src.core.errors import ConfigError
from src.core.config import SchemeDefaults
from src.core.schemas import RunConfig, SchemeParams, Stencil
from src.engine import DirichletEngine

LINEAR_EXTRA = 'u_exact = "x"'
LINEAR_F = "sign(x)*abs(x)^1.5"


@pytest.fixture
def engine():
    return DirichletEngine()


def _read_jsonl(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


class TestRunConfig:
    def test_unknown_key_is_named(self, engine):
        data = {
            "problem": {
                "domain": {"kind": "interval", "lo": [-1.0], "hi": [1.0]},
                "alpha": 0.0,
                "beta": 1.0,
                "lambda": 1.0,
                "a": 1.0,
                "A": 2.0,
                "gamma": 3.0,
            }
        }
        with pytest.raises(ConfigError) as exc:
            engine.parse_run_config(data)
        assert exc.value.key == "problem.gamma"

    def test_bundled_configs_load(self, engine, configs_dir):
        paths = sorted(configs_dir.glob("*.toml"))
        assert len(paths) == 9
        for path in paths:
            run = engine.load_run_config(str(path))
            assert run.problem.name == path.stem

    def test_auto_needs_an_exact_solution(self, engine, write_config, interval_toml):
        run = engine.load_run_config(write_config(interval_toml(f="auto")))
        with pytest.raises(ConfigError) as exc:
            engine.build_problem(run.problem)
        assert exc.value.key == "problem.f_expr"

    def test_unparsable_expression(self, engine, write_config, interval_toml):
        run = engine.load_run_config(write_config(interval_toml(b="1 + (x")))
        with pytest.raises(ConfigError) as exc:
            engine.build_problem(run.problem)
        assert exc.value.key == "problem.b_expr"

    def test_solver_block_maps_onto_scheme_params(self, engine, write_config, interval_toml):
        run = engine.load_run_config(write_config(interval_toml(tail='\n[solver]\nstencil = "axis"\n')))
        params = engine.scheme_params(run)
        assert params == SchemeParams(stencil=Stencil.AXIS)
        assert params.tol == SchemeDefaults.TOL
        assert params.continuation_steps == SchemeDefaults.CONTINUATION_STEPS
        assert set(SchemeParams.model_fields) - {"bracket_tol"} == set(type(run.solver).model_fields)

    def test_manufactured_problem(self, engine, configs_dir):
        run = engine.load_run_config(str(configs_dir / "manufactured_uniform.toml"))
        prob = engine.build_problem(run.problem, run.grid.h)
        assert prob.phi_field(-1.0) == pytest.approx(0.0, abs=1e-12)
        assert prob.f_sup is not None and prob.f_sup > 0


class TestSolveCommand:
    def test_writes_every_artifact(self, configs_dir, tmp_path, capsys):
        code = main(["solve", str(configs_dir / "manufactured_uniform.toml"), "--out", str(tmp_path)])
        assert code == EXIT_OK
        for name in ("solution.csv", "residual.csv", "report.jsonl", "report.md"):
            assert (tmp_path / name).exists()
        assert "solve: ok" in capsys.readouterr().out

        lines = _read_jsonl(tmp_path / "report.jsonl")
        assert [line["record"] for line in lines] == ["run", "solve", "oracle", "artifacts", "timing"]
        assert lines[2]["error_vs_oracle"] < 5e-2
        header = (tmp_path / "solution.csv").read_text().splitlines()[0]
        assert header == "x,u,residual"

    def test_report_format_only(self, configs_dir, tmp_path):
        code = main(
            ["solve", str(configs_dir / "manufactured_uniform.toml"), "--out", str(tmp_path), "--format", "report"]
        )
        assert code == EXIT_OK
        assert (tmp_path / "report.jsonl").exists()
        assert not list(tmp_path.glob("*.csv"))

    def test_reports_are_reproducible(self, configs_dir, tmp_path):
        config = str(configs_dir / "manufactured_uniform.toml")
        first, second = tmp_path / "a", tmp_path / "b"
        assert main(["solve", config, "--out", str(first)]) == EXIT_OK
        assert main(["solve", config, "--out", str(second)]) == EXIT_OK
        a = (first / "report.jsonl").read_text().splitlines()
        b = (second / "report.jsonl").read_text().splitlines()
        assert a[:-1] == b[:-1]
        assert json.loads(a[-1])["record"] == "timing"

    def test_config_echo_round_trips(self, configs_dir, tmp_path):
        config = str(configs_dir / "manufactured_uniform.toml")
        assert main(["solve", config, "--out", str(tmp_path)]) == EXIT_OK
        echo = _read_jsonl(tmp_path / "report.jsonl")[0]["config"]
        assert RunConfig.model_validate(echo) == DirichletEngine().load_run_config(config)

    def test_beta_above_critical_is_a_config_error(self, write_config, interval_toml, tmp_path, capsys):
        path = write_config(interval_toml(alpha=0.0, beta=3.0))
        assert main(["solve", path, "--out", str(tmp_path)]) == EXIT_CONFIG
        err = capsys.readouterr().err
        assert "config error" in err
        assert "(0, alpha+2]" in err

    def test_iteration_cap_is_not_converged(self, write_config, interval_toml, tmp_path):
        path = write_config(interval_toml(tail="\n[solver]\nmax_iters = 1\ntol = 1e-30\n"))
        assert main(["solve", path, "--out", str(tmp_path)]) == EXIT_NOT_CONVERGED
        lines = _read_jsonl(tmp_path / "report.jsonl")
        assert lines[0]["status"] == "not_converged"
        assert not (tmp_path / "solution.csv").exists()

    def test_missing_file(self, tmp_path, capsys):
        assert main(["solve", str(tmp_path / "missing.toml")]) == EXIT_CONFIG
        assert "<file>" in capsys.readouterr().err


class TestVerifyCommand:
    def test_centred_gradient_fails_the_suite(self, write_config, interval_toml, tmp_path):
        tail = '\n[solver]\nmonotone_gradient = false\n\n[verify]\nchecks = ["comparison_suite"]\ninstances = 1\n'
        path = write_config(interval_toml(tail=tail))
        assert main(["verify", path, "--out", str(tmp_path)]) == EXIT_CERTIFICATE
        certs = [line for line in _read_jsonl(tmp_path / "report.jsonl") if line["record"] == "certificate"]
        assert len(certs) == 1
        assert not certs[0]["passed"]

    def test_no_checks_requested(self, write_config, interval_toml, tmp_path, capsys):
        path = write_config(interval_toml())
        assert main(["verify", path, "--out", str(tmp_path)]) == EXIT_CONFIG
        assert "verify.checks" in capsys.readouterr().err

    def test_zero_gradient_fixture(self, configs_dir, tmp_path):
        assert main(["verify", str(configs_dir / "zero_gradient.toml"), "--out", str(tmp_path)]) == EXIT_OK

    def test_barrier_fixture_writes_the_table(self, configs_dir, tmp_path):
        code = main(["verify", str(configs_dir / "barrier_verification.toml"), "--out", str(tmp_path)])
        assert code == EXIT_OK
        assert (tmp_path / "barrier.csv").exists()

    def test_seed_override_changes_the_instances(self, engine, write_config, interval_toml, tmp_path):
        tail = '\n[verify]\nchecks = ["comparison_suite"]\ninstances = 1\n'
        run = engine.load_run_config(write_config(interval_toml(tail=tail)))
        first = engine.run_verify(run, str(tmp_path / "a"), seed=1)
        second = engine.run_verify(run, str(tmp_path / "b"), seed=2)
        assert first.certificates[0].instance_hash != second.certificates[0].instance_hash


class TestSweepCommand:
    def test_linear_solution_sweep(self, write_config, interval_toml, tmp_path, capsys):
        path = write_config(
            interval_toml(
                alpha=0.5,
                b="0",
                f=LINEAR_F,
                phi="x",
                extra=LINEAR_EXTRA,
                tail="h_list = [0.25, 0.125, 0.0625]\n",
            )
        )
        assert main(["sweep", path, "--out", str(tmp_path)]) == EXIT_OK
        assert (tmp_path / "sweep.csv").exists()
        out = capsys.readouterr().out
        assert out.count("h=") == 3
        rates = [line for line in _read_jsonl(tmp_path / "report.jsonl") if line["record"] == "rate"]
        assert len(rates) == 3
        assert all(row["error"] < 1e-7 for row in rates)
        assert rates[0]["lipschitz_change"] is None

    def test_needs_three_spacings(self, write_config, interval_toml, tmp_path, capsys):
        path = write_config(interval_toml(tail="h_list = [0.25, 0.125]\n"))
        assert main(["sweep", path, "--out", str(tmp_path)]) == EXIT_CONFIG
        assert "grid.h_list" in capsys.readouterr().err

    def test_bracket_width_without_an_oracle(self, engine, write_config, interval_toml, tmp_path):
        path = write_config(interval_toml(tail="h_list = [0.25, 0.125, 0.0625]\n"))
        report = engine.run_sweep(engine.load_run_config(path), str(tmp_path))
        assert report.status == "ok"
        assert all(row["error"] > 0 for row in report.rates)


class TestManufactureCommand:
    def test_prints_the_right_hand_side(self, configs_dir, tmp_path, capsys):
        config = str(configs_dir / "manufactured_uniform.toml")
        assert main(["manufacture", "cos(pi*x/2)", config, "--out", str(tmp_path)]) == EXIT_OK
        assert "f = " in capsys.readouterr().out

    def test_singular_points_are_listed(self, configs_dir, tmp_path, capsys):
        config = str(configs_dir / "manufactured_singular.toml")
        assert main(["manufacture", "1 - x^2", config, "--out", str(tmp_path)]) == EXIT_OK
        assert "singular: " in capsys.readouterr().out

    def test_bad_expression(self, configs_dir, tmp_path, capsys):
        config = str(configs_dir / "manufactured_uniform.toml")
        assert main(["manufacture", "cos(", config, "--out", str(tmp_path)]) == EXIT_CONFIG
        assert "u_expr" in capsys.readouterr().err


class TestFixtureGenerator:
    def test_bundled_files_match_the_definitions(self, engine, configs_dir):
        fixtures = generate_fixtures()
        assert sorted(fixtures) == sorted(p.stem for p in configs_dir.glob("*.toml"))
        for name, run in fixtures.items():
            assert engine.load_run_config(str(configs_dir / f"{name}.toml")) == run

    def test_written_toml_reloads(self, engine, tmp_path):
        fixtures = generate_fixtures()
        save_fixtures(fixtures, str(tmp_path))
        for name, run in fixtures.items():
            assert engine.load_run_config(str(tmp_path / f"{name}.toml")) == run
        text = to_toml(fixtures["comparison_centered"])
        assert "[solver]\nmonotone_gradient = false" in text
