import pytest
from fastapi.testclient import TestClient

from tactile_ec.main import app

SHORT = {
    "controller": {"spiral_steps": 2, "cone_steps": 2, "spiral_turns": 0.5},
    "solver": {"horizon": 2, "max_iterations": 20},
}


@pytest.fixture(scope="module")
def client():
    with TestClient(app) as c:
        yield c


def test_root_and_health(client):
    response = client.get("/")
    assert response.status_code == 200
    assert response.json()["status"] == "active"

    health = client.get("/health").json()
    assert health["status"] == "healthy"
    assert health["database_connected"] is True


def test_db_stats_lists_result_tables(client):
    stats = client.get("/db-stats").json()["database_stats"]
    assert {"experiment_runs", "trial_records"} <= set(stats["table_names"])


def test_missing_run_is_404(client):
    response = client.get("/experiments/987654")
    assert response.status_code == 404
    assert response.json()["detail"] == "Run not found"


def test_invalid_scenario_is_400(client):
    response = client.post("/experiments/point", json={"mu": -0.5})
    assert response.status_code == 400

    response = client.post("/experiments/point", json={"variant": "teleoperated"})
    assert response.status_code == 400


def test_unknown_object_is_400(client):
    response = client.post("/experiments/point", json={"object": "sphere", "overrides": SHORT})
    assert response.status_code == 400
    assert "unknown object" in response.json()["detail"]


def test_request_validation_is_422(client):
    assert client.post("/experiments/point", json={"trials": 0}).status_code == 422
    assert client.post("/experiments/point", json={"trials": 21}).status_code == 422


def test_point_run_is_stored_and_listed(client):
    response = client.post("/experiments/point", json={"object": "hexagon", "seed": 5, "overrides": SHORT})
    assert response.status_code == 200
    body = response.json()
    assert body["protocol"] == "point"
    assert {row["phase"] for row in body["summary"]} == {"small", "large"}

    detail = client.get(f"/experiments/{body['run_id']}").json()
    assert detail["object_name"] == "hexagon"
    assert detail["seed"] == 5
    assert [r["phase"] for r in detail["records"]] == ["small", "large"]
    assert detail["scenario"]["controller"]["spiral_steps"] == 2

    listed = client.get("/experiments", params={"protocol": "point"}).json()
    assert body["run_id"] in [run["id"] for run in listed]
    assert all(run["protocol"] == "point" for run in listed)


def test_force_eval_run_returns_the_misalignment_table(client):
    response = client.post("/experiments/force-eval", json={"seed": 1, "overrides": SHORT})
    assert response.status_code == 200
    table = response.json()["misalignment"]
    assert [row["variant"] for row in table] in ([], ["full", "no-delta", "no-K"])
