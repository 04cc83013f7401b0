#!/usr/bin/env python3
"""Record real API responses into frontend/fixtures/.

Drives the actual service (engine included) with a synthetic confounded
dataset, captures every response the UI consumes, and freezes them as JSON
fixtures. The frontend test suite replays these with fetch mocked, so UI
tests need no live engine.
"""

import io
import json
import sys
import tempfile
import threading
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

from fastapi.testclient import TestClient

from conftest import confounded_dataset
from psm_workbench.service import create_app


def main() -> int:
    root = Path(__file__).resolve().parent.parent
    out = root / "frontend" / "fixtures"
    out.mkdir(parents=True, exist_ok=True)

    ds = confounded_dataset(n=3000, seed=424242)
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        ds.save(tmp / "d.csv", tmp / "d.schema.json")
        app = create_app(tmp / "data")
        client = TestClient(app)

        r = client.post("/api/v1/datasets", files={
            "data": ("data.csv", io.BytesIO((tmp / "d.csv").read_bytes()), "text/csv"),
            "schema": ("schema.json", io.BytesIO((tmp / "d.schema.json").read_bytes()),
                       "application/json"),
        })
        dataset_id = r.json()["dataset_id"]

        fixtures: dict[str, object] = {
            "datasets": client.get("/api/v1/datasets").json(),
            "schema": client.get(f"/api/v1/datasets/{dataset_id}/schema").json(),
            "preview_ok": client.post(
                f"/api/v1/datasets/{dataset_id}/treatment-preview",
                json={"expression": "x > 0"}).json(),
        }
        r = client.post(f"/api/v1/datasets/{dataset_id}/treatment-preview",
                        json={"expression": "x >"})
        fixtures["preview_error"] = {"status": r.status_code, "body": r.json()}
        r = client.post(f"/api/v1/datasets/{dataset_id}/treatment-preview",
                        json={"expression": "x == x"})
        fixtures["preview_degenerate"] = {"status": r.status_code, "body": r.json()}

        manifest = {
            "seed": 7,
            "dataset_id": dataset_id,
            "treatment": {"column": "d"},
            "bootstrap": {"n_samples": 200, "alpha": 0.9},
            "sensitivity": {"enabled": True, "replicates_per_w": 3},
        }
        run_id = client.post("/api/v1/runs", json=manifest).json()["run_id"]

        states = []
        seen = set()
        while True:
            state = client.get(f"/api/v1/runs/{run_id}").json()
            key = (state["status"], state["stage"], state["progress"])
            if key not in seen:
                seen.add(key)
                states.append(state)
            if state["status"] in ("succeeded", "failed", "cancelled"):
                break
            time.sleep(0)
        assert states[-1]["status"] == "succeeded", states[-1]

        fixtures["run_submit"] = {"run_id": run_id}
        fixtures["run_states"] = states
        fixtures["results"] = client.get(f"/api/v1/runs/{run_id}/results").json()
        fixtures["diagnostics"] = client.get(f"/api/v1/runs/{run_id}/diagnostics").json()
        app.state.engine.shutdown()

    for name, doc in fixtures.items():
        (out / f"{name}.json").write_text(
            json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")
        print(f"wrote fixtures/{name}.json")
    stages = [s["stage"] for s in fixtures["run_states"] if s["stage"]]
    print(f"captured {len(fixtures['run_states'])} run states through stages: "
          f"{list(dict.fromkeys(stages))}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
