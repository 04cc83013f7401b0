"""Headless driver: the same pipeline from manifest + CSV files.

Exit codes: 0 success, 1 validation failure, 2 runtime failure, 64 usage
error. `run` writes canonical results.json / diagnostics.json; a fixed
seed makes the bytes reproducible across invocations and thread counts.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import jsonio, pipeline
from .dataset import DatasetSchema, ingest
from .errors import ManifestError, PipelineError, SchemaError, WorkbenchError
from .manifest import RunManifest

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(prog="psmw", description="Propensity-score-matching workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, manifest_required=True):
        p.add_argument("--manifest", required=manifest_required, help="manifest JSON path")
        p.add_argument("--data", required=True, help="dataset CSV path")
        p.add_argument("--schema", required=True, help="schema JSON sidecar path")
        p.add_argument("--seed", type=int, default=None, help="override the manifest seed")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: PSMW_THREADS or 1)")
        p.add_argument("--verbose", action="store_true")

    p_validate = sub.add_parser("validate", help="dataset + manifest checks only")
    add_common(p_validate, manifest_required=False)

    p_run = sub.add_parser("run", help="run the full pipeline")
    add_common(p_run)
    p_run.add_argument("--out", required=True, help="output directory")

    p_sens = sub.add_parser("sensitivity", help="run only the injection sweep")
    add_common(p_sens)
    p_sens.add_argument("--out", required=True, help="output directory")

    p_serve = sub.add_parser("serve", help="start the HTTP service")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--data-dir", default="./psmw-data",
                         help="root for uploaded datasets and run directories")
    p_serve.add_argument("--threads", type=int, default=None)
    return parser


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("PSMW_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def _load_inputs(args):
    schema = DatasetSchema.from_json_file(args.schema)
    ds = ingest(args.data, schema)
    manifest = None
    if getattr(args, "manifest", None):
        try:
            raw = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise SchemaError(f"cannot read manifest: {e}") from None
        manifest = RunManifest.from_dict(raw)
        if args.seed is not None:
            manifest = manifest.with_seed(args.seed)
        manifest.validate_against(ds.schema)
    return ds, manifest


def _summary_line(results: dict) -> str:
    lo, hi = results["ci_percentile"]
    label = int(round(results["alpha"] * 100))
    return (f"ATT={results['att']!r} CI{label}=[{lo!r},{hi!r}] "
            f"n_treated={results['counts']['n_treated']} "
            f"n_matched={results['counts']['n_treated_matched']}")


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "serve":
        import uvicorn

        from .service import create_app
        app = create_app(Path(args.data_dir), threads=_threads(args))
        uvicorn.run(app, host=args.host, port=args.port, log_level="info")
        return EXIT_OK

    try:
        ds, manifest = _load_inputs(args)
    except (SchemaError, WorkbenchError) as e:
        print(f"validation failed: {e}", file=sys.stderr)
        if isinstance(e, ManifestError):
            for fld, msg in sorted(e.field_errors.items()):
                print(f"  {fld}: {msg}", file=sys.stderr)
        return EXIT_VALIDATION

    if args.command == "validate":
        print(f"dataset OK: {ds.n_units} units, {len(ds.covariates)} covariates")
        if manifest is not None:
            print("manifest OK")
        return EXIT_OK

    def on_progress(stage: str, fraction: float):
        if args.verbose:
            print(f"[{fraction:6.1%}] {stage}", file=sys.stderr)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    threads = _threads(args)

    if args.command == "run":
        try:
            results = pipeline.execute(ds, manifest, threads=threads,
                                       progress=on_progress)
        except PipelineError as e:
            print(f"run failed: {e}", file=sys.stderr)
            return EXIT_RUNTIME
        jsonio.dump_path(results, out_dir / "results.json")
        jsonio.dump_path(results["diagnostics"], out_dir / "diagnostics.json")
        print(_summary_line(results))
        return EXIT_OK

    if args.command == "sensitivity":
        try:
            sweep_doc = pipeline.execute(ds, manifest, threads=threads,
                                         progress=on_progress, mode="sensitivity")
        except PipelineError as e:
            print(f"sensitivity sweep failed: {e}", file=sys.stderr)
            return EXIT_RUNTIME
        jsonio.dump_path(sweep_doc, out_dir / "sweep.json")
        print(f"sweep written: {out_dir / 'sweep.json'}")
        return EXIT_OK

    return EXIT_USAGE  # unreachable: subcommand is required


if __name__ == "__main__":
    sys.exit(main())
