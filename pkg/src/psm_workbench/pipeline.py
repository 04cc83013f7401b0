"""Staged execution of the full analysis.

One entry point, :func:`execute`, runs ingestion checks, treatment
assignment, model selection, matching, bootstrapping, diagnostics, and the
optional sensitivity sweep, emitting monotone progress per stage. The
output dictionary is a pure function of (dataset, manifest) — run ids,
clocks, and thread counts never leak into it — which is what makes the
byte-identical results contract possible.
"""

from __future__ import annotations

import datetime as dt
from typing import Callable

import numpy as np

from . import treatment_dsl
from .bootstrap import run_bootstrap, stratified_resample
from .dataset import (AnalysisDataset, DatasetSchema, ValidationReport,
                      check_overlap, correlation_screen, filter_by_window)
from .diagnostics import build_bundle
from .errors import CancelledRun, DegenerateTreatmentError, MatchingError, PipelineError, WorkbenchError
from .manifest import RunManifest
from .matching import MatchConfig, match, matched_att_arrays, with_att
from .propensity import (FeatureSet, FeatureTable, PropensityModel,
                         evaluate, fit, predict, select_model, split)
from .sensitivity import SYNTHETIC_NAME, sweep

STAGES = (
    "ingesting_characteristics",
    "assigning_treatment",
    "selecting_model",
    "matching",
    "bootstrapping",
    "diagnostics",
    "sensitivity",
)

#: selection 30%, bootstrap 50%, the remainder split over the small stages
_RAW_WEIGHTS = {
    "ingesting_characteristics": 0.04,
    "assigning_treatment": 0.02,
    "selecting_model": 0.30,
    "matching": 0.06,
    "bootstrapping": 0.50,
    "diagnostics": 0.04,
    "sensitivity": 0.04,
}

ProgressFn = Callable[[str, float], None]
CancelFn = Callable[[], bool]


class _Tracker:
    """Clamped monotone progress emission over the active stages."""

    def __init__(self, cb: ProgressFn | None, active: list[str]):
        total = sum(_RAW_WEIGHTS[s] for s in active)
        self._weights = {s: _RAW_WEIGHTS[s] / total for s in active}
        self._cb = cb
        self._completed = 0.0
        self._last = 0.0
        self._stage = active[0]

    def begin(self, stage: str):
        self._stage = stage
        self._emit(self._completed)

    def within(self, frac: float):
        w = self._weights.get(self._stage, 0.0)
        self._emit(self._completed + w * frac)

    def end(self):
        self._completed += self._weights.get(self._stage, 0.0)
        self._emit(self._completed)

    def _emit(self, value: float):
        self._last = max(self._last, min(value, 1.0))
        if self._cb:
            self._cb(self._stage, self._last)


def _guard(should_cancel: CancelFn | None):
    if should_cancel and should_cancel():
        raise CancelledRun("cancelled at stage boundary")


def _reroll_outcome(ds: AnalysisDataset, outcome_name: str) -> AnalysisDataset:
    """Use a continuous covariate as this run's outcome metric: it moves out
    of the covariate list and the originally declared outcome is dropped."""
    if outcome_name == ds.schema.outcome:
        return ds
    schema = DatasetSchema(
        covariates=tuple(c for c in ds.schema.covariates if c.name != outcome_name),
        outcome=outcome_name,
        treatment=ds.schema.treatment,
        date=ds.schema.date,
        unit_id=ds.schema.unit_id,
    )
    columns = {k: v for k, v in ds.columns.items() if k != ds.schema.outcome}
    return AnalysisDataset(schema=schema, unit_ids=ds.unit_ids,
                           columns=columns, dates=ds.dates)


def _reroll_treatment_covariate(ds: AnalysisDataset, column: str) -> AnalysisDataset:
    """Promote a binary covariate to the treatment role for this run."""
    schema = DatasetSchema(
        covariates=tuple(c for c in ds.schema.covariates if c.name != column),
        outcome=ds.schema.outcome,
        treatment=column,
        date=ds.schema.date,
        unit_id=ds.schema.unit_id,
    )
    return AnalysisDataset(schema=schema, unit_ids=ds.unit_ids,
                           columns=dict(ds.columns), dates=ds.dates)


def _assign_treatment(ds: AnalysisDataset, manifest: RunManifest) -> tuple[AnalysisDataset, np.ndarray, dict]:
    if manifest.treatment_column is not None:
        col = manifest.treatment_column
        if col != ds.schema.treatment:
            ds = _reroll_treatment_covariate(ds, col)
        d = ds.treatment
        if not ((d == 0).any() and (d == 1).any()):
            raise DegenerateTreatmentError(f"treatment column '{col}' is one-sided in the analysis window")
        info = {"source": "column", "column": col}
    else:
        expr = treatment_dsl.parse(manifest.treatment_expression)
        assignment = treatment_dsl.assign(expr, ds)
        d = assignment.values
        # columns the expression reads determine the treatment exactly, so
        # keeping them as model features would destroy overlap by construction
        used = treatment_dsl.referenced_columns(expr)
        if used:
            schema = DatasetSchema(
                covariates=tuple(c for c in ds.schema.covariates if c.name not in used),
                outcome=ds.schema.outcome,
                treatment=ds.schema.treatment,
                date=ds.schema.date,
                unit_id=ds.schema.unit_id,
            )
            ds = AnalysisDataset(schema=schema, unit_ids=ds.unit_ids,
                                 columns=dict(ds.columns), dates=ds.dates)
        info = {"source": "expression", "expression": manifest.treatment_expression}
    info["n_treated"] = int((d == 1).sum())
    info["n_control"] = int((d == 0).sum())
    return ds, np.asarray(d, dtype=np.float64), info


def execute(ds: AnalysisDataset, manifest: RunManifest, threads: int = 1,
            progress: ProgressFn | None = None,
            should_cancel: CancelFn | None = None,
            mode: str = "full") -> dict:
    """Run the pipeline and return the results document (JSON-ready).

    ``mode="sensitivity"`` stops after model selection and runs only the
    injection sweep (used by the CLI ``sensitivity`` subcommand).
    """
    manifest.validate_against(ds.schema)
    sensitivity_on = manifest.sensitivity.enabled or mode == "sensitivity"
    if mode == "sensitivity":
        active = ["ingesting_characteristics", "assigning_treatment",
                  "selecting_model", "sensitivity"]
    else:
        active = [s for s in STAGES if s != "sensitivity" or sensitivity_on]
    tracker = _Tracker(progress, active)

    # -- ingesting_characteristics ---------------------------------------
    _guard(should_cancel)
    tracker.begin("ingesting_characteristics")
    try:
        if manifest.history_days is not None:
            ref = manifest.reference_date
            if ref is None:
                ref = ds.dates.max().item()  # latest observation date
            ds = filter_by_window(ds, manifest.history_days, ref)
        if manifest.outcome is not None:
            ds = _reroll_outcome(ds, manifest.outcome)
        screen = correlation_screen(ds, manifest.correlation_threshold)
    except WorkbenchError as e:
        raise PipelineError("ingesting_characteristics", e) from e
    tracker.end()

    # -- assigning_treatment ----------------------------------------------
    _guard(should_cancel)
    tracker.begin("assigning_treatment")
    try:
        ds, d, treatment_info = _assign_treatment(ds, manifest)
    except WorkbenchError as e:
        raise PipelineError("assigning_treatment", e) from e
    tracker.end()

    # -- selecting_model ----------------------------------------------------
    _guard(should_cancel)
    tracker.begin("selecting_model")
    try:
        table = FeatureTable.from_dataset(ds)
        split_index = split(ds.unit_ids, d, manifest.train_fraction, manifest.seed)
        selection = select_model(
            table, d, split_index, ds.unit_ids,
            base_features=manifest.base_features,
            config=manifest.selection,
            threads=threads,
            progress=tracker.within,
        )
        # production model: the winning feature set refitted on all rows
        production = fit(table, d, selection.best_model.feature_set,
                         manifest.selection.fit)
        scores_all = predict(production, table)

        id_to_row = {uid: i for i, uid in enumerate(ds.unit_ids)}
        train_rows = np.array([id_to_row[u] for u in split_index.train_ids], dtype=np.int64)
        test_rows = np.array([id_to_row[u] for u in split_index.test_ids], dtype=np.int64)
        heldout_scores = predict(selection.best_model, table)
        eval_train = evaluate(heldout_scores[train_rows], d[train_rows], split="train")
        eval_test = evaluate(heldout_scores[test_rows], d[test_rows], split="test")
    except WorkbenchError as e:
        raise PipelineError("selecting_model", e) from e
    tracker.end()

    if mode == "sensitivity":
        _guard(should_cancel)
        tracker.begin("sensitivity")
        result = _run_sweep(ds, d, table, production, manifest, threads,
                            tracker, should_cancel)
        tracker.end()
        return result.to_dict()

    # -- matching ------------------------------------------------------------
    _guard(should_cancel)
    tracker.begin("matching")
    try:
        overlap = check_overlap(scores_all[d == 1], scores_all[d == 0],
                                manifest.overlap_trim_quantile)
        mask = (scores_all >= overlap.common_lo) & (scores_all <= overlap.common_hi)
        n_excluded = int(ds.n_units - mask.sum())
        validation = ValidationReport(
            overlap_pass=overlap.overlap_pass,
            overlap=overlap,
            consolidation_warnings=screen.consolidation_warnings,
            degenerate_columns=screen.degenerate_columns,
            n_excluded_off_support=n_excluded,
        )
        if not overlap.overlap_pass:
            raise MatchingError("no common support between treated and control scores")
        sub_rows = np.flatnonzero(mask)
        sub_ids = [ds.unit_ids[i] for i in sub_rows]
        d_sub = d[sub_rows]
        scores_sub = scores_all[sub_rows]
        if not ((d_sub == 1).any() and (d_sub == 0).any()):
            raise MatchingError("common-support trim removed an entire treatment arm")
        t_local = np.flatnonzero(d_sub == 1)
        c_local = np.flatnonzero(d_sub == 0)
        match_result = match(
            [sub_ids[i] for i in t_local], scores_sub[t_local],
            [sub_ids[i] for i in c_local], scores_sub[c_local],
            manifest.match,
        )
        outcome_by_id = {sub_ids[i]: float(ds.outcome[sub_rows[i]]) for i in range(len(sub_ids))}
        match_result = with_att(match_result, outcome_by_id)
        att_point = match_result.att
    except WorkbenchError as e:
        raise PipelineError("matching", e) from e
    tracker.end()

    # -- bootstrapping --------------------------------------------------------
    _guard(should_cancel)
    tracker.begin("bootstrapping")
    try:
        replicate = _make_replicate(ds, d, table, production, manifest)
        boot = run_bootstrap(
            replicate, att_point=att_point, seed=manifest.seed,
            n_samples=manifest.bootstrap.n_samples, alpha=manifest.bootstrap.alpha,
            threads=threads,
            progress=lambda done, total: tracker.within(done / total),
            should_cancel=should_cancel,
        )
    except CancelledRun:
        raise
    except WorkbenchError as e:
        raise PipelineError("bootstrapping", e) from e
    tracker.end()

    # -- diagnostics ------------------------------------------------------------
    _guard(should_cancel)
    tracker.begin("diagnostics")
    try:
        ds_sub = ds.take(sub_rows)
        bundle = build_bundle(
            ds_sub, d_sub, scores_sub, match_result,
            table.subset(sub_rows), production.feature_set, bins=manifest.bins,
        )
    except WorkbenchError as e:
        raise PipelineError("diagnostics", e) from e
    tracker.end()

    sweep_result = None
    if sensitivity_on:
        _guard(should_cancel)
        tracker.begin("sensitivity")
        sweep_result = _run_sweep(ds, d, table, production, manifest, threads,
                                  tracker, should_cancel)
        tracker.end()

    est = np.asarray(boot.estimates, dtype=np.float64)
    hist_edges = np.histogram_bin_edges(est, bins=manifest.bins)
    hist_counts, _ = np.histogram(est, bins=hist_edges)

    results = {
        "att": att_point,
        "ci_percentile": list(boot.ci_percentile),
        "ci_basic": list(boot.ci_basic),
        "ci_symmetric": list(boot.ci_symmetric),
        "alpha": boot.alpha,
        "bootstrap": boot.to_dict(),
        "bootstrap_hist": {
            "edges": [float(e) for e in hist_edges],
            "counts": [int(c) for c in hist_counts],
        },
        "counts": {
            "sample_size": ds.n_units,
            "n_treated": treatment_info["n_treated"],
            "n_control": treatment_info["n_control"],
            "n_treated_matched": match_result.n_treated_matched,
            "n_unmatched_treated": len(match_result.unmatched_treated),
            "n_control_used": match_result.n_control_used,
            "n_excluded_off_support": validation.n_excluded_off_support,
            "history_days": manifest.history_days,
        },
        "treatment": treatment_info,
        "validation": _validation_dict(validation),
        "model": production.to_dict(),
        "model_evaluation": {"train": eval_train.to_dict(), "test": eval_test.to_dict()},
        "selection": {
            "stage1": [r.to_dict() for r in selection.stage1],
            "stage2": [r.to_dict() for r in selection.stage2],
            "chosen": selection.best_record.to_dict(),
            "top_k": manifest.selection.top_k,
        },
        "matching": match_result.to_dict(),
        "diagnostics": bundle.to_dict(),
        "sensitivity": None if sweep_result is None else sweep_result.to_dict(),
        "parameters": manifest.to_dict(include_dataset=False),
    }
    tracker.within(1.0)
    return results


def _validation_dict(v: ValidationReport) -> dict:
    o = v.overlap
    return {
        "overlap_pass": v.overlap_pass,
        "overlap": {
            "trim_quantile": o.trim_quantile,
            "common_lo": o.common_lo,
            "common_hi": o.common_hi,
            "treated": vars(o.treated).copy(),
            "control": vars(o.control).copy(),
        },
        "consolidation_warnings": [
            {"first": w.first, "second": w.second, "r": w.r}
            for w in v.consolidation_warnings
        ],
        "degenerate_columns": list(v.degenerate_columns),
        "n_excluded_off_support": v.n_excluded_off_support,
    }


def _make_replicate(ds: AnalysisDataset, d: np.ndarray, table: FeatureTable,
                    production: PropensityModel, manifest: RunManifest):
    """Build the bootstrap replicate closure: resample within arms, refit
    the frozen feature set, re-trim, re-match, re-estimate."""
    t_rows = np.flatnonzero(d == 1)
    c_rows = np.flatnonzero(d == 0)
    y = ds.outcome
    fit_cfg = manifest.selection.fit
    trim = manifest.overlap_trim_quantile
    match_cfg = manifest.match
    feature_set = production.feature_set
    # the full-sample optimum is an excellent warm start for every resample
    warm = np.concatenate([[production.intercept], production.coefs])

    def replicate(b: int, rng: np.random.Generator) -> float:
        idx = stratified_resample(rng, t_rows, c_rows)
        sub_table = table.subset(idx)
        d_sub = d[idx]
        y_sub = y[idx]
        model = fit(sub_table, d_sub, feature_set, fit_cfg, init=warm)
        scores = predict(model, sub_table)
        return _match_att(scores, d_sub, y_sub, trim, match_cfg)

    return replicate


def _match_att(scores: np.ndarray, d: np.ndarray, y: np.ndarray,
               trim: float, match_cfg: MatchConfig) -> float:
    """Trim to common support and compute the matched ATT on arrays, with
    in-sample positions as the (total, deterministic) tie-break order."""
    treated = d == 1
    overlap = check_overlap(scores[treated], scores[~treated], trim)
    if not overlap.overlap_pass:
        raise MatchingError("no common support")
    mask = (scores >= overlap.common_lo) & (scores <= overlap.common_hi)
    t_rows = np.flatnonzero(mask & treated)
    c_rows = np.flatnonzero(mask & ~treated)
    if t_rows.size == 0 or c_rows.size == 0:
        raise MatchingError("support trim removed an entire arm")
    att, _ = matched_att_arrays(scores[t_rows], scores[c_rows],
                                y[t_rows], y[c_rows], match_cfg)
    return att


def _run_sweep(ds: AnalysisDataset, d: np.ndarray, table: FeatureTable,
               production: PropensityModel, manifest: RunManifest, threads: int,
               tracker: _Tracker, should_cancel: CancelFn | None):
    base_fs = production.feature_set
    aug_fs = FeatureSet(
        base_features=base_fs.base_features + (SYNTHETIC_NAME,),
        interactions=base_fs.interactions,
    )
    coef_index = aug_fs.feature_names.index(SYNTHETIC_NAME)
    y = ds.outcome
    fit_cfg = manifest.selection.fit
    trim = manifest.overlap_trim_quantile
    match_cfg = manifest.match
    target_values = y if manifest.sensitivity.target == "outcome" else d

    def refit(s_col: np.ndarray):
        aug = table.with_column(SYNTHETIC_NAME, s_col, "continuous")
        model = fit(aug, d, aug_fs, fit_cfg)
        scores = predict(model, aug)
        att = _match_att(scores, d, y, trim, match_cfg)
        return model.coefs[coef_index], model.coefficients_by_name(), att

    try:
        return sweep(
            target_values, refit, seed=manifest.seed,
            replicates_per_w=manifest.sensitivity.replicates_per_w,
            target_label=manifest.sensitivity.target,
            threads=threads,
            progress=lambda done, total: tracker.within(done / total),
            should_cancel=should_cancel,
        )
    except CancelledRun:
        raise
    except WorkbenchError as e:
        raise PipelineError("sensitivity", e) from e
