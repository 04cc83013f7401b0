"""Shared fixtures and synthetic data generators."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from psm_workbench.dataset import AnalysisDataset, CovariateSpec, DatasetSchema
from psm_workbench.propensity import sigmoid


def write_dataset(tmp_path: Path, header, rows, schema_dict, stem="data"):
    """Write a CSV + schema sidecar pair and return their paths."""
    csv_path = tmp_path / f"{stem}.csv"
    schema_path = tmp_path / f"{stem}.schema.json"
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    schema_path.write_text(json.dumps(schema_dict))
    return csv_path, schema_path


def basic_schema_dict(**overrides):
    d = {
        "unit_id": "unit_id",
        "outcome": "y",
        "treatment": "d",
        "date": None,
        "covariates": [{"name": "age", "kind": "continuous"}],
    }
    d.update(overrides)
    return d


def build_dataset(columns: dict[str, np.ndarray], covariates, outcome="y",
                  treatment=None, dates=None, date_name=None) -> AnalysisDataset:
    """Assemble an AnalysisDataset directly from arrays (no CSV round trip)."""
    n = len(next(iter(columns.values())))
    schema = DatasetSchema(
        covariates=tuple(
            CovariateSpec(name, kind, tuple(cats))
            for name, kind, cats in covariates
        ),
        outcome=outcome,
        treatment=treatment,
        date=date_name,
        unit_id="unit_id",
    )
    cols = {}
    for name, values in columns.items():
        arr = np.asarray(values)
        cols[name] = arr if arr.dtype.kind == "U" else arr.astype(np.float64)
    return AnalysisDataset(
        schema=schema,
        unit_ids=tuple(f"u{i:05d}" for i in range(n)),
        columns=cols,
        dates=dates,
    )


def confounded_data(n: int, seed: int, tau: float = 2.0, assignment_scale: float = 1.0,
                    noise_sd: float = 1.0):
    """The workhorse generator: assignment logit depends on x, outcome is
    tau * D + x + noise. Returns (x, d, y)."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    p = sigmoid(assignment_scale * x)
    d = (rng.uniform(size=n) < p).astype(np.float64)
    y = tau * d + x + noise_sd * rng.standard_normal(n)
    return x, d, y


def confounded_dataset(n: int, seed: int, tau: float = 2.0, **kw) -> AnalysisDataset:
    x, d, y = confounded_data(n, seed, tau, **kw)
    return build_dataset(
        {"x": x, "d": d, "y": y},
        covariates=[("x", "continuous", ())],
        outcome="y", treatment="d",
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)
