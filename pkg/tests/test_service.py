"""HTTP surface: endpoints, status codes, error bodies."""

import io
import json
import time

import pytest
from fastapi.testclient import TestClient

from psm_workbench import service
from psm_workbench.service import create_app


CSV = """unit_id,y,d,x,flag
u01,2.04,1,0.3,1
u02,-1.36,0,-1.04,1
u03,1.55,1,0.75,1
u04,1.12,0,0.94,0
u05,1.77,1,-1.95,0
u06,-0.11,0,-1.3,0
u07,1.4,1,0.13,0
u08,0.07,0,-0.32,0
u09,2.11,1,-0.02,1
u10,-0.21,0,-0.85,0
u11,3.31,1,0.88,1
u12,0.61,0,0.78,1
u13,2.71,1,0.07,1
u14,0.63,0,1.13,1
u15,2.52,1,0.47,0
u16,0.2,0,-0.86,1
u17,0.73,1,0.37,0
u18,-0.8,0,-0.96,0
u19,1.97,1,0.88,1
u20,-0.66,0,-0.05,0
u21,1.63,1,-0.18,0
u22,1.15,0,-0.68,0
u23,1.74,1,1.22,1
u24,0.89,0,-0.15,0
"""

SCHEMA = {
    "unit_id": "unit_id",
    "outcome": "y",
    "treatment": "d",
    "date": None,
    "covariates": [{"name": "x", "kind": "continuous"},
                   {"name": "flag", "kind": "binary"}],
}


@pytest.fixture
def client(tmp_path):
    app = create_app(tmp_path / "data")
    with TestClient(app) as c:
        yield c
    app.state.engine.shutdown()


def upload(client, csv_text=CSV, schema=SCHEMA):
    return client.post(
        "/api/v1/datasets",
        files={
            "data": ("data.csv", io.BytesIO(csv_text.encode()), "text/csv"),
            "schema": ("schema.json", io.BytesIO(json.dumps(schema).encode()),
                       "application/json"),
        },
    )


def wait_run(client, run_id, timeout=30.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        state = client.get(f"/api/v1/runs/{run_id}").json()
        if state["status"] in ("succeeded", "failed", "cancelled"):
            return state
        time.sleep(0.01)
    raise TimeoutError(state)


class TestDatasets:
    def test_upload_and_list(self, client):
        r = upload(client)
        assert r.status_code == 201
        dataset_id = r.json()["dataset_id"]
        listing = client.get("/api/v1/datasets").json()["datasets"]
        assert [d["dataset_id"] for d in listing] == [dataset_id]
        assert listing[0]["n_units"] == 24

    def test_schema_endpoint(self, client):
        dataset_id = upload(client).json()["dataset_id"]
        schema = client.get(f"/api/v1/datasets/{dataset_id}/schema").json()
        assert schema["outcome"] == "y"
        assert [c["name"] for c in schema["covariates"]] == ["x", "flag"]

    def test_bad_schema_422_with_field_errors(self, client):
        schema = dict(SCHEMA, covariates=[{"name": "absent", "kind": "continuous"}])
        r = upload(client, schema=schema)
        assert r.status_code == 422
        body = r.json()
        assert body["code"]
        assert body["field_errors"]

    def test_row_error_has_code(self, client):
        bad = CSV.replace("u03,1.55,1,0.75,1", "u03,zzz,1,0.75,1")
        r = upload(client, csv_text=bad)
        assert r.status_code == 422
        assert r.json()["code"] == "row_error"

    def test_unknown_dataset_404(self, client):
        assert client.get("/api/v1/datasets/none/schema").status_code == 404

    def test_upload_size_cap(self, client, monkeypatch):
        monkeypatch.setattr(service, "MAX_UPLOAD_BYTES", 64)
        r = upload(client)
        assert r.status_code == 413
        assert r.json()["code"] == "payload_too_large"


class TestTreatmentPreview:
    def test_exact_counts(self, client):
        dataset_id = upload(client).json()["dataset_id"]
        r = client.post(f"/api/v1/datasets/{dataset_id}/treatment-preview",
                        json={"expression": "x > 0"})
        assert r.status_code == 200
        # row-wise oracle: x > 0 holds on exactly 12 of the 24 rows
        assert r.json() == {"n_treated": 12, "n_control": 12}

    def test_tautology_degenerate(self, client):
        dataset_id = upload(client).json()["dataset_id"]
        r = client.post(f"/api/v1/datasets/{dataset_id}/treatment-preview",
                        json={"expression": "x == x"})
        assert r.status_code == 422
        assert r.json()["code"] == "degenerate_treatment"

    def test_syntax_error_offset(self, client):
        dataset_id = upload(client).json()["dataset_id"]
        r = client.post(f"/api/v1/datasets/{dataset_id}/treatment-preview",
                        json={"expression": "x >"})
        assert r.status_code == 422
        body = r.json()
        assert body["code"] == "dsl_syntax_error"
        assert body["field_errors"]["offset"] == "4"

    def test_no_run_created(self, client, tmp_path):
        dataset_id = upload(client).json()["dataset_id"]
        client.post(f"/api/v1/datasets/{dataset_id}/treatment-preview",
                    json={"expression": "x > 0"})
        assert list((tmp_path / "data" / "runs").iterdir()) == []


def run_manifest(dataset_id, **overrides):
    m = {
        "seed": 31,
        "dataset_id": dataset_id,
        "treatment": {"column": "d"},
        "bootstrap": {"n_samples": 8},
    }
    m.update(overrides)
    return m


class TestRuns:
    def test_full_run_roundtrip(self, client):
        dataset_id = upload(client).json()["dataset_id"]
        r = client.post("/api/v1/runs", json=run_manifest(dataset_id))
        assert r.status_code == 202
        run_id = r.json()["run_id"]
        state = wait_run(client, run_id)
        assert state["status"] == "succeeded"
        assert state["progress"] == 1.0

        results = client.get(f"/api/v1/runs/{run_id}/results")
        assert results.status_code == 200
        body = results.json()
        assert "att" in body and "diagnostics" in body

        diag = client.get(f"/api/v1/runs/{run_id}/diagnostics")
        assert diag.status_code == 200
        assert diag.json() == body["diagnostics"]

    def test_results_before_completion_409(self, client):
        dataset_id = upload(client).json()["dataset_id"]
        run_id = client.post(
            "/api/v1/runs",
            json=run_manifest(dataset_id, bootstrap={"n_samples": 5000}),
        ).json()["run_id"]
        r = client.get(f"/api/v1/runs/{run_id}/results")
        assert r.status_code == 409
        client.post(f"/api/v1/runs/{run_id}/cancel")
        wait_run(client, run_id)

    def test_cancel_then_conflict(self, client):
        dataset_id = upload(client).json()["dataset_id"]
        run_id = client.post(
            "/api/v1/runs",
            json=run_manifest(dataset_id, bootstrap={"n_samples": 5000}),
        ).json()["run_id"]
        assert client.post(f"/api/v1/runs/{run_id}/cancel").status_code == 200
        wait_run(client, run_id)
        assert client.post(f"/api/v1/runs/{run_id}/cancel").status_code == 409

    def test_invalid_manifest_422(self, client):
        dataset_id = upload(client).json()["dataset_id"]
        r = client.post("/api/v1/runs",
                        json=run_manifest(dataset_id, treatment={"column": "zz"}))
        assert r.status_code == 422
        assert "treatment.column" in r.json()["field_errors"]

    def test_missing_dataset_id(self, client):
        r = client.post("/api/v1/runs", json={"seed": 1,
                                              "treatment": {"column": "d"}})
        assert r.status_code == 422
        assert r.json()["field_errors"] == {"dataset_id": "required"}

    def test_unknown_run_404(self, client):
        assert client.get("/api/v1/runs/none").status_code == 404
        assert client.get("/api/v1/runs/none/results").status_code == 404

    def test_shipped_openapi_covers_all_routes(self, client):
        from pathlib import Path
        doc = json.loads(Path("docs/openapi.json").read_text())
        served = {r.path for r in client.app.routes if r.path.startswith("/api/")}
        assert served <= set(doc["paths"])

    def test_responses_are_canonical_json(self, client):
        from psm_workbench import jsonio
        dataset_id = upload(client).json()["dataset_id"]
        run_id = client.post("/api/v1/runs", json=run_manifest(dataset_id)).json()["run_id"]
        wait_run(client, run_id)
        raw = client.get(f"/api/v1/runs/{run_id}/results").content
        assert raw == jsonio.dumps(json.loads(raw)).encode()

    def test_cli_and_service_results_byte_identical(self, client, tmp_path):
        """Equal (manifest, dataset, seed) through either surface must
        persist the same results.json bytes."""
        from psm_workbench.cli import main

        dataset_id = upload(client).json()["dataset_id"]
        manifest = run_manifest(dataset_id, seed=77)
        run_id = client.post("/api/v1/runs", json=manifest).json()["run_id"]
        wait_run(client, run_id)
        engine = client.app.state.engine
        service_bytes = (engine.root / run_id / "results.json").read_bytes()

        (tmp_path / "d.csv").write_text(CSV)
        (tmp_path / "d.schema.json").write_text(json.dumps(SCHEMA))
        cli_manifest = {k: v for k, v in manifest.items() if k != "dataset_id"}
        (tmp_path / "m.json").write_text(json.dumps(cli_manifest))
        assert main(["run", "--manifest", str(tmp_path / "m.json"),
                     "--data", str(tmp_path / "d.csv"),
                     "--schema", str(tmp_path / "d.schema.json"),
                     "--out", str(tmp_path / "out")]) == 0
        cli_bytes = (tmp_path / "out" / "results.json").read_bytes()
        assert cli_bytes == service_bytes
