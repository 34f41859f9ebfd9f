"""
End-to-end acceptance runs over the bundled fixtures and seeded suites
"""

import numpy as np
import pytest

from src.core.schemas import CheckName, SchemeParams
from src.core.utils import relative_change
from src.engine import DirichletEngine
from src.modules.barriers import barrier_residual, certified_barrier
from src.modules.certify import comparison_suite, sandwich_check, strong_max_probe
from src.modules.domains import build_grid, make_interval
from src.modules.scheme import solve

pytestmark = [pytest.mark.slow, pytest.mark.acceptance]

MANUFACTURED = ["manufactured_uniform", "manufactured_degenerate", "manufactured_singular"]


@pytest.fixture(scope="module")
def engine():
    return DirichletEngine()


def _load(engine, configs_dir, name):
    run = engine.load_run_config(str(configs_dir / f"{name}.toml"))
    return run.model_copy(update={"output": run.output.model_copy(update={"formats": []})})


@pytest.mark.parametrize("name", MANUFACTURED)
def test_manufactured_convergence_and_lipschitz_stability(engine, configs_dir, tmp_path, name):
    report = engine.run_sweep(_load(engine, configs_dir, name), str(tmp_path))
    assert report.status == "ok"
    errors = [row["error"] for row in report.rates]
    assert len(errors) == 5
    for coarse, fine in zip(errors, errors[1:]):
        assert coarse / fine >= 1.7
    assert report.rates[-1]["lipschitz_change"] < 0.1


@pytest.mark.parametrize("name", MANUFACTURED)
def test_uniqueness_from_both_brackets(engine, configs_dir, tmp_path, name):
    run = _load(engine, configs_dir, name)
    run = run.model_copy(update={"verify": run.verify.model_copy(update={"checks": [CheckName.UNIQUENESS]})})
    report = engine.run_verify(run, str(tmp_path))
    assert report.status == "ok"
    assert report.certificates[0].margin <= 1e-6


def test_barrier_draws(make_problem):
    rng = np.random.default_rng(11)
    level = 2.0
    draws = []
    for _ in range(10):
        alpha = float(rng.uniform(-0.5, 1.5))
        draws.append((alpha, float(rng.uniform(0.2, alpha + 1.9)), float(rng.uniform(0.0, 1.0))))
    for _ in range(3):
        alpha = float(rng.uniform(-0.5, 1.5))
        draws.append((alpha, alpha + 2.0, float(rng.uniform(0.1, 1.0))))

    for alpha, beta, b in draws:
        prob = make_problem(alpha=alpha, beta=beta, b=f"{b:.6f}", domain=make_interval(0.0, 1.0))
        spec = certified_barrier(prob, level)
        assert spec.certified, (alpha, beta, b)
        width = prob.domain.collar_width
        collar = np.concatenate([np.linspace(0.0, width, 500), np.linspace(1.0 - width, 1.0, 500)])
        assert np.all(barrier_residual(spec, prob, collar) >= 0.9 * level)


def test_comparison_suite_passes():
    records = comparison_suite(seed=7, n=50)
    assert len(records) == 50
    failed = [r.instance_hash for r in records if not r.passed]
    assert not failed


def test_centred_gradient_fails_somewhere():
    params = SchemeParams(monotone_gradient=False)
    records = comparison_suite(seed=7, n=50, params=params)
    assert any(not r.passed for r in records)
    # ordering itself must break, not only the monotonicity check
    ordering = [
        r
        for r in records
        if r.margin > 10.0 * params.tol or r.details.get("error", "").startswith("BracketViolated")
    ]
    assert ordering


def test_sandwich_and_strong_max_are_stable(engine, configs_dir):
    run = _load(engine, configs_dir, "sandwich_hopf")
    prob = engine.build_problem(run.problem, min(run.grid.h_list))
    results = []
    for h in sorted(run.grid.h_list)[:2]:
        u_h, _ = solve(prob, build_grid(prob.domain, h))
        results.append((sandwich_check(u_h), strong_max_probe(u_h, prob)))

    (fine, fine_max), (coarse, coarse_max) = results
    for sandwich in (fine, coarse):
        assert sandwich.passed
        assert sandwich.c > 0
    assert relative_change(fine.c, coarse.c) < 0.1
    assert relative_change(fine.C, coarse.C) < 0.1
    assert fine_max.passed and coarse_max.passed
    assert fine_max.interior_min > 0


def test_zero_gradient_fixture(engine, configs_dir, tmp_path):
    report = engine.run_verify(_load(engine, configs_dir, "zero_gradient"), str(tmp_path))
    assert report.status == "ok"
    assert report.certificates[0].details["q_min"] == pytest.approx(3.0)
