import pytest

from backend.app import app

INTERVAL = {"kind": "interval", "lo": [-1.0], "hi": [1.0]}


def _config(**problem):
    block = {
        "domain": INTERVAL,
        "alpha": 0.0,
        "beta": 1.0,
        "lambda": 1.0,
        "a": 1.0,
        "A": 2.0,
        "b_expr": "1",
        "f_expr": "1",
    }
    block.update(problem)
    return {"problem": block, "grid": {"h": 0.125}}


@pytest.fixture
def client():
    app.config["TESTING"] = True
    with app.test_client() as c:
        yield c


def test_health(client):
    resp = client.get("/api/health")
    assert resp.status_code == 200
    assert resp.get_json() == {"status": "ok"}


def test_solve_returns_the_nodal_solution(client):
    resp = client.post("/api/solve", json=_config())
    assert resp.status_code == 200
    body = resp.get_json()
    assert body["report"]["status"] == "ok"
    assert len(body["u"]) == len(body["nodes"]) == 17
    assert body["u"][0] == pytest.approx(0.0)
    assert min(body["u"][1:-1]) > 0
    assert body["report"]["artifacts"] == []


def test_solve_not_converged(client):
    config = _config()
    config["solver"] = {"max_iters": 1, "tol": 1e-30}
    resp = client.post("/api/solve", json=config)
    assert resp.status_code == 422
    assert resp.get_json()["report"]["status"] == "not_converged"


def test_config_error_names_the_key(client):
    resp = client.post("/api/solve", json=_config(beta=3.0))
    assert resp.status_code == 400
    assert resp.get_json()["key"] == "problem.beta"


def test_unknown_key(client):
    config = _config()
    config["grid"]["spacing"] = 0.1
    resp = client.post("/api/solve", json=config)
    assert resp.status_code == 400
    assert resp.get_json()["key"] == "grid.spacing"


def test_verify_zero_gradient(client):
    config = _config(alpha=-0.5, b_expr="0", f_expr="-1")
    config["verify"] = {"checks": ["zero_gradient"], "v_expr": "x^4", "x_bar": [0.0], "q": 3.0}
    resp = client.post("/api/verify?seed=3", json=config)
    assert resp.status_code == 200
    body = resp.get_json()
    assert body["passed"]
    assert body["report"]["certificates"][0]["name"] == "zero_gradient"


def test_manufacture(client):
    resp = client.post("/api/manufacture", json={"u_expr": "cos(pi*x/2)", "config": _config()})
    assert resp.status_code == 200
    body = resp.get_json()
    assert body["f"]
    assert body["singular_points"] == []


def test_manufacture_needs_u_expr(client):
    resp = client.post("/api/manufacture", json={"config": _config()})
    assert resp.status_code == 400
    assert resp.get_json()["key"] == "u_expr"
