"""Asynchronous run orchestration with durable per-run directories.

Each run lives in ``<root>/<run_id>/`` as ``manifest.json``, ``state.json``
and (on success) ``results.json``, all canonical JSON. One worker thread
consumes a FIFO queue, so at most one run executes at a time while
submit/poll/fetch stay non-blocking. Results are a pure function of
(manifest, dataset, seed); run ids and timestamps live only in state.json.
"""

from __future__ import annotations

import datetime as dt
import queue
import secrets
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import jsonio, pipeline
from .dataset import AnalysisDataset
from .errors import (CancelledRun, PipelineError, RunConflictError,
                     RunNotFoundError, WorkbenchError)
from .manifest import RunManifest

TERMINAL = ("succeeded", "failed", "cancelled")


@dataclass(frozen=True)
class RunState:
    run_id: str
    status: str                  # queued | running | succeeded | failed | cancelled
    stage: str | None
    progress: float
    submitted_at: str
    started_at: str | None
    finished_at: str | None
    error: dict | None           # {"stage":..., "code":..., "message":...}

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "status": self.status,
            "stage": self.stage,
            "progress": self.progress,
            "submitted_at": self.submitted_at,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "error": self.error,
        }


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


@dataclass
class _Record:
    state: RunState
    manifest: RunManifest | None = None
    dataset: AnalysisDataset | None = None
    cancel_event: threading.Event = field(default_factory=threading.Event)


class RunEngine:
    """Submit, track, cancel and persist analysis runs."""

    def __init__(self, root: Path | str, threads: int = 1):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.threads = threads
        self._records: dict[str, _Record] = {}
        self._lock = threading.Lock()
        self._queue: "queue.Queue[str | None]" = queue.Queue()
        self._recover()
        self._worker = threading.Thread(target=self._work, daemon=True,
                                        name="psmw-run-worker")
        self._worker.start()

    # -- lifecycle ---------------------------------------------------------

    def _recover(self) -> None:
        """Reload persisted runs. Runs that were mid-flight when the process
        died are marked failed; terminal runs stay byte-identical."""
        for run_dir in sorted(self.root.iterdir()) if self.root.exists() else []:
            state_file = run_dir / "state.json"
            if not state_file.is_file():
                continue
            raw = jsonio.load_path(state_file)
            state = RunState(**raw)
            if state.status not in TERMINAL:
                state = replace(
                    state, status="failed", finished_at=_now(),
                    error={"stage": state.stage, "code": "interrupted",
                           "message": "engine restarted before the run finished"},
                )
                jsonio.dump_path(state.to_dict(), state_file)
            self._records[state.run_id] = _Record(state=state)

    def shutdown(self) -> None:
        self._queue.put(None)
        self._worker.join(timeout=5)

    # -- public surface ------------------------------------------------------

    def submit(self, manifest: RunManifest, dataset: AnalysisDataset) -> str:
        """Validate statically, persist the manifest, and enqueue. No run is
        created when validation fails."""
        manifest.validate_against(dataset.schema)  # raises ManifestError
        run_id = secrets.token_hex(16)  # 128-bit
        state = RunState(
            run_id=run_id, status="queued", stage=None, progress=0.0,
            submitted_at=_now(), started_at=None, finished_at=None, error=None,
        )
        run_dir = self.root / run_id
        run_dir.mkdir(parents=True)
        jsonio.dump_path(manifest.to_dict(), run_dir / "manifest.json")
        jsonio.dump_path(state.to_dict(), run_dir / "state.json")
        with self._lock:
            self._records[run_id] = _Record(state=state, manifest=manifest,
                                            dataset=dataset)
        self._queue.put(run_id)
        return run_id

    def poll(self, run_id: str) -> RunState:
        with self._lock:
            rec = self._records.get(run_id)
            if rec is None:
                raise RunNotFoundError(f"no such run '{run_id}'")
            return rec.state

    def fetch_results(self, run_id: str) -> dict:
        state = self.poll(run_id)
        if state.status == "succeeded":
            return jsonio.load_path(self.root / run_id / "results.json")
        if state.status == "failed":
            err = state.error or {}
            raise RunConflictError(
                f"run failed at stage '{err.get('stage')}': {err.get('message')}")
        if state.status == "cancelled":
            raise RunConflictError("run was cancelled; no results")
        raise RunConflictError(f"run is {state.status}; results not available yet")

    def cancel(self, run_id: str) -> RunState:
        with self._lock:
            rec = self._records.get(run_id)
            if rec is None:
                raise RunNotFoundError(f"no such run '{run_id}'")
            if rec.state.status in TERMINAL or rec.cancel_event.is_set():
                raise RunConflictError(f"run is {rec.state.status}; cannot cancel")
            rec.cancel_event.set()
            if rec.state.status == "queued":
                self._transition(rec, status="cancelled", finished_at=_now())
            return rec.state

    # -- worker ---------------------------------------------------------------

    def _transition(self, rec: _Record, **changes) -> None:
        rec.state = replace(rec.state, **changes)
        jsonio.dump_path(rec.state.to_dict(), self.root / rec.state.run_id / "state.json")

    def _work(self) -> None:
        while True:
            run_id = self._queue.get()
            if run_id is None:
                return
            with self._lock:
                rec = self._records.get(run_id)
                if rec is None or rec.state.status != "queued":
                    continue  # cancelled while queued
                self._transition(rec, status="running", started_at=_now())
            self._execute(rec)
            with self._lock:
                rec.dataset = None  # release memory once terminal

    def _execute(self, rec: _Record) -> None:
        run_id = rec.state.run_id

        def on_progress(stage: str, fraction: float):
            with self._lock:
                if rec.state.stage != stage or fraction - rec.state.progress >= 0.005 \
                        or fraction in (0.0, 1.0):
                    self._transition(rec, stage=stage, progress=fraction)

        try:
            results = pipeline.execute(
                rec.dataset, rec.manifest, threads=self.threads,
                progress=on_progress,
                should_cancel=rec.cancel_event.is_set,
            )
            jsonio.dump_path(results, self.root / run_id / "results.json")
            with self._lock:
                self._transition(rec, status="succeeded", progress=1.0,
                                 finished_at=_now())
        except CancelledRun:
            with self._lock:
                self._transition(rec, status="cancelled", finished_at=_now())
        except PipelineError as e:
            with self._lock:
                self._transition(rec, status="failed", finished_at=_now(),
                                 error={"stage": e.stage, "code": e.cause.code
                                        if isinstance(e.cause, WorkbenchError) else "error",
                                        "message": str(e.cause)})
        except WorkbenchError as e:
            with self._lock:
                self._transition(rec, status="failed", finished_at=_now(),
                                 error={"stage": rec.state.stage, "code": e.code,
                                        "message": str(e)})
