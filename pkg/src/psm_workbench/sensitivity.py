"""Synthetic-confounder injection sweep.

To probe omitted-variable bias empirically, a synthetic covariate is mixed
from the standardized target column and Gaussian noise,

    s = w * standardize(target) + (1 - w) * noise,   re-standardized,

and the selected model is refitted with ``s`` added while w walks the
fixed grid {0.0, 0.1, ..., 1.0}. The same noise draw is reused across the
whole grid within a replicate, so the w = 0 cell is the exact baseline of
its replicate and att_shift(0) == 0 by construction.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dataset import AnalysisDataset, CovariateSpec, DatasetSchema
from .errors import CancelledRun, SensitivityError, WorkbenchError
from .propensity import STREAM_SENSITIVITY

SYNTHETIC_NAME = "synthetic_confounder"

#: the fixed mix-weight grid: intervals of 10%
GRID: tuple[float, ...] = tuple(i / 10.0 for i in range(11))

DEFAULT_REPLICATES = 10


def standardize(values: np.ndarray) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    sd = float(v.std(ddof=0))
    if sd == 0.0:
        raise SensitivityError("target column is constant; cannot standardize")
    return (v - v.mean()) / sd


def mix_column(target_values: np.ndarray, w: float, noise: np.ndarray) -> np.ndarray:
    """The injected column for mix weight ``w``: standardized target and
    noise blended, then re-standardized to mean 0 / sd 1."""
    if not 0.0 <= w <= 1.0:
        raise SensitivityError("mix weight w must be in [0, 1]")
    z = standardize(target_values)
    s = w * z + (1.0 - w) * np.asarray(noise, dtype=np.float64)
    return standardize(s)


def inject(ds: AnalysisDataset, w: float, target: str = "outcome",
           seed: int = 0) -> AnalysisDataset:
    """Append the synthetic confounder as a continuous covariate.

    ``target`` selects which channel the confounder correlates with:
    the outcome column or the (declared) treatment column.
    """
    noise = np.random.default_rng([seed, STREAM_SENSITIVITY]).standard_normal(ds.n_units)
    target_values = _target_values(ds, target)
    s = mix_column(target_values, w, noise)
    if SYNTHETIC_NAME in ds.columns:
        raise SensitivityError(f"column '{SYNTHETIC_NAME}' already exists")
    schema = DatasetSchema(
        covariates=ds.schema.covariates + (CovariateSpec(SYNTHETIC_NAME, "continuous"),),
        outcome=ds.schema.outcome,
        treatment=ds.schema.treatment,
        date=ds.schema.date,
        unit_id=ds.schema.unit_id,
    )
    columns = dict(ds.columns)
    columns[SYNTHETIC_NAME] = s
    return AnalysisDataset(schema=schema, unit_ids=ds.unit_ids,
                           columns=columns, dates=ds.dates)


def _target_values(ds: AnalysisDataset, target: str) -> np.ndarray:
    if target == "outcome":
        return ds.outcome
    if target == "treatment":
        if ds.treatment is None:
            raise SensitivityError("dataset has no treatment column to target")
        return ds.treatment
    raise SensitivityError(f"unknown injection target '{target}'")


@dataclass(frozen=True)
class SweepCell:
    w: float
    replicate: int
    injected_coef: float
    att: float
    att_shift: float | None
    coefficients: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "w": self.w, "replicate": self.replicate,
            "injected_coef": self.injected_coef,
            "att": self.att, "att_shift": self.att_shift,
            "coefficients": self.coefficients,
        }


@dataclass(frozen=True)
class SweepSummaryRow:
    w: float
    n_ok: int
    injected_coef_mean: float | None
    injected_coef_se: float | None
    att_mean: float | None
    att_shift_mean: float | None
    coefficient_means: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "w": self.w, "n_ok": self.n_ok,
            "injected_coef_mean": self.injected_coef_mean,
            "injected_coef_se": self.injected_coef_se,
            "att_mean": self.att_mean,
            "att_shift_mean": self.att_shift_mean,
            "coefficient_means": self.coefficient_means,
        }


@dataclass(frozen=True)
class SensitivitySweep:
    grid: tuple[float, ...]
    replicates_per_w: int
    seed: int
    target: str
    cells: tuple[SweepCell, ...]
    failures: tuple[tuple[float, int, str], ...]
    summary: tuple[SweepSummaryRow, ...]

    def to_dict(self) -> dict:
        return {
            "grid": list(self.grid),
            "replicates_per_w": self.replicates_per_w,
            "seed": self.seed,
            "target": self.target,
            "cells": [c.to_dict() for c in self.cells],
            "failures": [[w, r, m] for w, r, m in self.failures],
            "summary": [s.to_dict() for s in self.summary],
        }


#: a refit callback receives the injected column and returns
#: (injected-feature coefficient, all coefficients by name, att)
RefitFn = Callable[[np.ndarray], tuple[float, dict[str, float], float]]


def sweep(target_values: np.ndarray, refit_fn: RefitFn, seed: int,
          replicates_per_w: int = DEFAULT_REPLICATES, target_label: str = "outcome",
          threads: int = 1,
          progress: Callable[[int, int], None] | None = None,
          should_cancel: Callable[[], bool] | None = None) -> SensitivitySweep:
    """Run the full (w, replicate) grid.

    A failed cell is recorded and excluded; cells are merged by
    (replicate, w) index so parallelism never changes the output.
    """
    n = len(target_values)
    if replicates_per_w < 1:
        raise SensitivityError("replicates_per_w must be >= 1")

    tasks = [(rep, wi) for rep in range(replicates_per_w) for wi in range(len(GRID))]
    outcome: dict[tuple[int, int], tuple[SweepCell | None, str | None]] = {}

    def one(task: tuple[int, int]):
        rep, wi = task
        if should_cancel and should_cancel():
            raise CancelledRun("cancelled during sensitivity sweep")
        w = GRID[wi]
        noise = np.random.default_rng([seed, STREAM_SENSITIVITY, rep]).standard_normal(n)
        try:
            s = mix_column(target_values, w, noise)
            coef, coefs, att = refit_fn(s)
            cell = SweepCell(w=w, replicate=rep, injected_coef=float(coef),
                             att=float(att), att_shift=None, coefficients=coefs)
            return task, cell, None
        except CancelledRun:
            raise
        except WorkbenchError as e:
            return task, None, str(e)

    done = 0
    total = len(tasks)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for task, cell, err in pool.map(one, tasks):
                outcome[task] = (cell, err)
                done += 1
                if progress:
                    progress(done, total)
    else:
        for task in tasks:
            task, cell, err = one(task)
            outcome[task] = (cell, err)
            done += 1
            if progress:
                progress(done, total)

    cells: list[SweepCell] = []
    failures: list[tuple[float, int, str]] = []
    for rep in range(replicates_per_w):
        base_cell, _ = outcome[(rep, 0)]
        base_att = base_cell.att if base_cell is not None else None
        for wi, w in enumerate(GRID):
            cell, err = outcome[(rep, wi)]
            if cell is None:
                failures.append((w, rep, err or "failed"))
                continue
            shift = None if base_att is None else cell.att - base_att
            cells.append(SweepCell(w=cell.w, replicate=cell.replicate,
                                   injected_coef=cell.injected_coef, att=cell.att,
                                   att_shift=shift, coefficients=cell.coefficients))

    summary: list[SweepSummaryRow] = []
    for w in GRID:
        ok = [c for c in cells if c.w == w]
        if not ok:
            summary.append(SweepSummaryRow(w=w, n_ok=0, injected_coef_mean=None,
                                           injected_coef_se=None, att_mean=None,
                                           att_shift_mean=None, coefficient_means={}))
            continue
        coefs = np.array([c.injected_coef for c in ok])
        atts = np.array([c.att for c in ok])
        shifts = [c.att_shift for c in ok if c.att_shift is not None]
        names = sorted({k for c in ok for k in c.coefficients})
        coef_means = {
            k: float(np.mean([c.coefficients[k] for c in ok if k in c.coefficients]))
            for k in names
        }
        se = float(coefs.std(ddof=1) / np.sqrt(len(coefs))) if len(coefs) > 1 else None
        summary.append(SweepSummaryRow(
            w=w, n_ok=len(ok),
            injected_coef_mean=float(coefs.mean()),
            injected_coef_se=se,
            att_mean=float(atts.mean()),
            att_shift_mean=float(np.mean(shifts)) if shifts else None,
            coefficient_means=coef_means,
        ))

    return SensitivitySweep(
        grid=GRID, replicates_per_w=replicates_per_w, seed=seed,
        target=target_label, cells=tuple(cells), failures=tuple(failures),
        summary=tuple(summary),
    )
