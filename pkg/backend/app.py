"""
Degenerate Dirichlet Toolkit - API Backend
Flask JSON API over the engine: the request body is the run configuration tree
"""

import os
import sys
import tempfile

from flask import Flask, jsonify, request
from flask_cors import CORS

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.core.errors import BracketViolated, ConfigError, DirichletError, MaxItersExceeded
from src.engine import DirichletEngine, _jsonable

app = Flask(__name__)
CORS(app)

# Initialize engine
engine = DirichletEngine()


def _run_config(body):
    """API runs keep artifacts in memory: nothing is written to disk"""
    run = engine.parse_run_config(body or {})
    return run.model_copy(update={"output": run.output.model_copy(update={"formats": []})})


def _report_json(report):
    return _jsonable(report.model_dump(mode="json"))


@app.errorhandler(ConfigError)
def config_error(exc):
    return jsonify({"error": str(exc), "key": exc.key}), 400


@app.errorhandler(MaxItersExceeded)
@app.errorhandler(BracketViolated)
def solver_error(exc):
    return jsonify({"error": str(exc)}), 422


@app.errorhandler(DirichletError)
def dirichlet_error(exc):
    return jsonify({"error": str(exc)}), 400


@app.route('/api/health')
def health():
    """Liveness probe"""
    return jsonify({"status": "ok"})


@app.route('/api/solve', methods=['POST'])
def api_solve():
    """Solve one instance; returns the report and the nodal solution"""
    run = _run_config(request.get_json(silent=True))
    with tempfile.TemporaryDirectory() as out:
        report = engine.run_solve(run, out)
    payload = {"report": _report_json(report)}
    u_h = engine.last_solution
    if u_h is not None:
        payload["nodes"] = u_h.grid.coords.tolist()
        payload["u"] = u_h.values.tolist()
    status = 200 if report.status == "ok" else 422
    return jsonify(_jsonable(payload)), status


@app.route('/api/verify', methods=['POST'])
def api_verify():
    """Run the configured certificates; ?seed=N overrides the suite seed"""
    run = _run_config(request.get_json(silent=True))
    seed = request.args.get("seed", type=int)
    with tempfile.TemporaryDirectory() as out:
        report = engine.run_verify(run, out, seed=seed)
    return jsonify({"report": _report_json(report), "passed": report.status == "ok"})


@app.route('/api/manufacture', methods=['POST'])
def api_manufacture():
    """Body: {"u_expr": "...", "config": {...}}"""
    body = request.get_json(silent=True) or {}
    if "u_expr" not in body:
        raise ConfigError("u_expr", "field required")
    run = _run_config(body.get("config"))
    with tempfile.TemporaryDirectory() as out:
        rhs, _ = engine.run_manufacture(body["u_expr"], run, out)
    return jsonify(
        _jsonable(
            {
                "f": str(rhs.field),
                "singular_points": [list(p) for p in rhs.singular_points],
                "kinked": rhs.kinked,
            }
        )
    )


if __name__ == '__main__':
    app.run(debug=True, host='0.0.0.0', port=5000)
