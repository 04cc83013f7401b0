"""HTTP facade over the run engine and dataset management.

All success and error bodies are canonical JSON. Every error carries a
machine code; 4xx are caller faults (404 unknown resource, 409 status
conflicts, 413 oversized uploads, 422 validation), 5xx engine faults.
"""

from __future__ import annotations

import csv
import io
import json
import secrets
from pathlib import Path
from typing import Any

from fastapi import FastAPI, File, Request, Response, UploadFile
from fastapi.middleware.cors import CORSMiddleware

from . import jsonio, treatment_dsl
from .dataset import AnalysisDataset, DatasetSchema, ingest_rows
from .engine import RunEngine
from .errors import (DegenerateTreatmentError, DslError, ManifestError,
                     RowError, RunConflictError, RunNotFoundError,
                     SchemaError, WorkbenchError)
from .manifest import RunManifest

MAX_UPLOAD_BYTES = 256 * 1024 * 1024


class CanonicalJSONResponse(Response):
    media_type = "application/json"

    def render(self, content: Any) -> bytes:
        return jsonio.dumps(content).encode("utf-8")


def _error_body(code: str, message: str, field_errors: dict | None = None) -> dict:
    return {"code": code, "message": message, "field_errors": field_errors}


class DatasetStore:
    """Uploaded datasets, ingested eagerly and persisted as CSV + schema."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._cache: dict[str, AnalysisDataset] = {}
        for d in sorted(self.root.iterdir()):
            if (d / "schema.json").is_file() and (d / "data.csv").is_file():
                self._cache[d.name] = self._load(d.name)

    def _load(self, dataset_id: str) -> AnalysisDataset:
        d = self.root / dataset_id
        schema = DatasetSchema.from_json_file(d / "schema.json")
        from .dataset import ingest
        return ingest(d / "data.csv", schema)

    def add(self, csv_text: str, schema_dict: dict) -> str:
        schema = DatasetSchema.from_dict(schema_dict)
        reader = csv.reader(io.StringIO(csv_text))
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty file: no header row") from None
        ds = ingest_rows(header, list(reader), schema)
        dataset_id = secrets.token_hex(8)
        d = self.root / dataset_id
        d.mkdir(parents=True)
        (d / "data.csv").write_text(csv_text, encoding="utf-8")
        (d / "schema.json").write_text(json.dumps(schema.to_dict(), indent=2, sort_keys=True),
                                       encoding="utf-8")
        self._cache[dataset_id] = ds
        return dataset_id

    def get(self, dataset_id: str) -> AnalysisDataset:
        if dataset_id not in self._cache:
            raise RunNotFoundError(f"no such dataset '{dataset_id}'")
        return self._cache[dataset_id]

    def list(self) -> list[dict]:
        out = []
        for dataset_id in sorted(self._cache):
            ds = self._cache[dataset_id]
            out.append({
                "dataset_id": dataset_id,
                "n_units": ds.n_units,
                "outcome": ds.schema.outcome,
                "treatment": ds.schema.treatment,
                "date": ds.schema.date,
                "n_covariates": len(ds.covariates),
            })
        return out


def create_app(data_root: Path | str, threads: int = 1,
               cors_origins: tuple[str, ...] = ("*",)) -> FastAPI:
    """Build the application with its own dataset store and run engine
    rooted at ``data_root``."""
    data_root = Path(data_root)
    store = DatasetStore(data_root / "datasets")
    engine = RunEngine(data_root / "runs", threads=threads)

    app = FastAPI(title="PSM Workbench API", version="1.0.0",
                  default_response_class=CanonicalJSONResponse)
    app.state.store = store
    app.state.engine = engine
    app.add_middleware(
        CORSMiddleware, allow_origins=list(cors_origins),
        allow_methods=["*"], allow_headers=["*"],
    )

    def err(status: int, code: str, message: str, field_errors: dict | None = None):
        return CanonicalJSONResponse(_error_body(code, message, field_errors),
                                     status_code=status)

    @app.exception_handler(WorkbenchError)
    async def workbench_error_handler(_request: Request, exc: WorkbenchError):
        if isinstance(exc, RunNotFoundError):
            status = 404
        elif isinstance(exc, RunConflictError):
            status = 409
        elif isinstance(exc, ManifestError):
            return err(422, exc.code, str(exc), exc.field_errors)
        else:
            status = 422
        return err(status, exc.code, str(exc))

    # -- datasets -----------------------------------------------------------

    @app.post("/api/v1/datasets", status_code=201)
    async def upload_dataset(data: UploadFile,
                             schema_file: UploadFile = File(alias="schema")):
        csv_bytes = await data.read(MAX_UPLOAD_BYTES + 1)
        if len(csv_bytes) > MAX_UPLOAD_BYTES:
            return err(413, "payload_too_large", "dataset exceeds 256 MiB")
        schema_bytes = await schema_file.read(MAX_UPLOAD_BYTES + 1)
        try:
            schema_dict = json.loads(schema_bytes.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            return err(422, "schema_error", f"schema is not valid JSON: {e}",
                       {"schema": str(e)})
        try:
            dataset_id = store.add(csv_bytes.decode("utf-8"), schema_dict)
        except UnicodeDecodeError as e:
            return err(422, "schema_error", f"dataset is not valid UTF-8: {e}",
                       {"data": str(e)})
        except (SchemaError, RowError) as e:
            field = getattr(e, "column", None) or "data"
            return err(422, e.code, str(e), {field: str(e)})
        return CanonicalJSONResponse({"dataset_id": dataset_id}, status_code=201)

    @app.get("/api/v1/datasets")
    async def list_datasets():
        return {"datasets": store.list()}

    @app.get("/api/v1/datasets/{dataset_id}/schema")
    async def dataset_schema(dataset_id: str):
        ds = store.get(dataset_id)
        return ds.schema.to_dict()

    @app.post("/api/v1/datasets/{dataset_id}/treatment-preview")
    async def treatment_preview(dataset_id: str, body: dict):
        ds = store.get(dataset_id)
        expression = body.get("expression")
        if not isinstance(expression, str) or not expression.strip():
            return err(422, "dsl_error", "body must carry a non-empty 'expression'",
                       {"expression": "required"})
        try:
            expr = treatment_dsl.parse(expression)
            assignment = treatment_dsl.assign(expr, ds)
        except (DslError, DegenerateTreatmentError) as e:
            detail = {"expression": str(e)}
            offset = getattr(e, "offset", None)
            if offset is not None:
                detail["offset"] = str(offset)
            return err(422, e.code, str(e), detail)
        return {"n_treated": assignment.n_treated, "n_control": assignment.n_control}

    # -- runs -----------------------------------------------------------------

    @app.post("/api/v1/runs", status_code=202)
    async def submit_run(body: dict):
        manifest = RunManifest.from_dict(body)  # 422 via handler on failure
        if manifest.dataset_id is None:
            return err(422, "manifest_invalid", "dataset_id required",
                       {"dataset_id": "required"})
        ds = store.get(manifest.dataset_id)
        run_id = engine.submit(manifest, ds)
        return CanonicalJSONResponse({"run_id": run_id}, status_code=202)

    @app.get("/api/v1/runs/{run_id}")
    async def run_state(run_id: str):
        return engine.poll(run_id).to_dict()

    @app.get("/api/v1/runs/{run_id}/results")
    async def run_results(run_id: str):
        return engine.fetch_results(run_id)

    @app.get("/api/v1/runs/{run_id}/diagnostics")
    async def run_diagnostics(run_id: str):
        return engine.fetch_results(run_id)["diagnostics"]

    @app.post("/api/v1/runs/{run_id}/cancel")
    async def cancel_run(run_id: str):
        state = engine.cancel(run_id)
        return state.to_dict()

    return app
