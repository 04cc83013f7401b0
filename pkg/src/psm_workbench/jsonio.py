"""Canonical JSON serialization.

All files and HTTP bodies produced by the workbench use one byte-stable
encoding: UTF-8, sorted keys, compact separators, shortest round-trip
float formatting (CPython's repr), and no NaN/Infinity. Two runs that
compute equal values therefore serialize to equal bytes.
"""

from __future__ import annotations

import dataclasses
import json
import math
from pathlib import Path
from typing import Any

import numpy as np


def to_jsonable(obj: Any) -> Any:
    """Recursively convert dataclasses, numpy scalars/arrays, tuples and
    paths into plain JSON-compatible structures."""
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise ValueError(f"non-finite float not representable in canonical JSON: {obj}")
        return obj
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return to_jsonable(float(obj))
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, Path):
        return str(obj)
    if hasattr(obj, "isoformat"):  # date / datetime
        return obj.isoformat()
    raise TypeError(f"cannot serialize {type(obj).__name__} to canonical JSON")


def dumps(obj: Any) -> str:
    return json.dumps(
        to_jsonable(obj),
        sort_keys=True,
        ensure_ascii=False,
        allow_nan=False,
        separators=(",", ":"),
    )


def dump_path(obj: Any, path: Path) -> None:
    """Write canonical JSON atomically (tmp file + rename)."""
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(dumps(obj), encoding="utf-8")
    tmp.replace(path)


def load_path(path: Path) -> Any:
    return json.loads(path.read_text(encoding="utf-8"))
