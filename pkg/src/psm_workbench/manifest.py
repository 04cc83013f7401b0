"""Run manifest: the full user-supplied configuration of one analysis.

A manifest is pure data; it validates in two phases. Structural parsing
(:meth:`RunManifest.from_dict`) accumulates per-field messages, and
:meth:`RunManifest.validate_against` binds names and the treatment
expression to a concrete dataset schema. Both raise
:class:`~psm_workbench.errors.ManifestError` carrying ``field_errors``.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field, replace

from . import treatment_dsl
from .bootstrap import DEFAULT_ALPHA, DEFAULT_N_SAMPLES
from .dataset import DatasetSchema
from .errors import DslError, ManifestError, MatchingError
from .matching import MatchConfig
from .propensity import FitConfig, SelectionConfig
from .sensitivity import DEFAULT_REPLICATES


@dataclass(frozen=True)
class SensitivitySettings:
    enabled: bool = False
    replicates_per_w: int = DEFAULT_REPLICATES
    target: str = "outcome"


@dataclass(frozen=True)
class BootstrapSettings:
    n_samples: int = DEFAULT_N_SAMPLES
    alpha: float = DEFAULT_ALPHA


@dataclass(frozen=True)
class RunManifest:
    seed: int
    treatment_column: str | None = None
    treatment_expression: str | None = None
    outcome: str | None = None          # None -> the schema's outcome column
    history_days: int | None = None
    reference_date: dt.date | None = None
    dataset_id: str | None = None
    base_features: tuple[str, ...] | None = None
    train_fraction: float = 0.8
    bootstrap: BootstrapSettings = field(default_factory=BootstrapSettings)
    match: MatchConfig = field(default_factory=MatchConfig)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    overlap_trim_quantile: float = 0.01
    correlation_threshold: float = 0.9
    sensitivity: SensitivitySettings = field(default_factory=SensitivitySettings)
    bins: int = 30

    # -- parsing ----------------------------------------------------------

    @classmethod
    def from_dict(cls, raw: dict) -> "RunManifest":
        errors: dict[str, str] = {}

        def want(cond: bool, fld: str, msg: str):
            if not cond:
                errors[fld] = msg

        seed = raw.get("seed")
        want(isinstance(seed, int) and not isinstance(seed, bool) and seed >= 0,
             "seed", "required non-negative integer (no wall-clock default)")

        treatment = raw.get("treatment") or {}
        column = treatment.get("column")
        expression = treatment.get("expression")
        if bool(column) == bool(expression):
            errors["treatment"] = "exactly one of treatment.column or treatment.expression required"

        outcome = raw.get("outcome")
        if outcome is not None:
            want(isinstance(outcome, str), "outcome", "must be a column name")

        history_days = raw.get("history_days")
        if history_days is not None:
            want(isinstance(history_days, int) and history_days >= 1,
                 "history_days", "must be an integer >= 1")

        reference_date = None
        if raw.get("reference_date") is not None:
            try:
                reference_date = dt.date.fromisoformat(raw["reference_date"])
            except (TypeError, ValueError):
                errors["reference_date"] = "must be an ISO-8601 date (YYYY-MM-DD)"

        boot = raw.get("bootstrap") or {}
        n_samples = boot.get("n_samples", DEFAULT_N_SAMPLES)
        alpha = boot.get("alpha", DEFAULT_ALPHA)
        want(isinstance(n_samples, int) and n_samples >= 2,
             "bootstrap.n_samples", "must be an integer >= 2")
        want(isinstance(alpha, (int, float)) and 0.0 < alpha < 1.0,
             "bootstrap.alpha", "must be in (0, 1)")

        match_raw = raw.get("match") or {}
        match_cfg = None
        try:
            match_cfg = MatchConfig(
                k=match_raw.get("k", 5),
                with_replacement=bool(match_raw.get("with_replacement", True)),
                caliper=match_raw.get("caliper"),
                caliper_scale=match_raw.get("caliper_scale", 0.2),
            )
        except MatchingError as e:
            errors["match"] = str(e)

        sel_raw = raw.get("selection") or {}
        selection = SelectionConfig(
            top_k=sel_raw.get("top_k", 5),
            max_base_subset_size=sel_raw.get("max_base_subset_size"),
            subset_budget=sel_raw.get("subset_budget", 4096),
            interaction_budget=sel_raw.get("interaction_budget", 512),
            fit=FitConfig(
                max_iter=sel_raw.get("max_iter", 100),
                tol=sel_raw.get("tol", 1e-8),
                l2=sel_raw.get("l2", 1e-6),
            ),
        )
        want(selection.top_k >= 1, "selection.top_k", "must be >= 1")

        train_fraction = sel_raw.get("train_fraction", 0.8)
        want(isinstance(train_fraction, (int, float)) and 0.0 < train_fraction < 1.0,
             "selection.train_fraction", "must be in (0, 1)")

        base_features = sel_raw.get("base_features")
        if base_features is not None:
            if not (isinstance(base_features, list) and base_features
                    and all(isinstance(b, str) for b in base_features)):
                errors["selection.base_features"] = "must be a non-empty list of column names"
            else:
                base_features = tuple(base_features)

        trim = raw.get("overlap_trim_quantile", 0.01)
        want(isinstance(trim, (int, float)) and 0.0 <= trim < 0.5,
             "overlap_trim_quantile", "must be in [0, 0.5)")

        corr = raw.get("correlation_threshold", 0.9)
        want(isinstance(corr, (int, float)) and 0.0 < corr < 1.0,
             "correlation_threshold", "must be in (0, 1)")

        sens_raw = raw.get("sensitivity") or {}
        sens = SensitivitySettings(
            enabled=bool(sens_raw.get("enabled", False)),
            replicates_per_w=sens_raw.get("replicates_per_w", DEFAULT_REPLICATES),
            target=sens_raw.get("target", "outcome"),
        )
        want(sens.replicates_per_w >= 1,
             "sensitivity.replicates_per_w", "must be >= 1")
        want(sens.target in ("outcome", "treatment"),
             "sensitivity.target", "must be 'outcome' or 'treatment'")

        bins = raw.get("bins", 30)
        want(isinstance(bins, int) and bins >= 2, "bins", "must be an integer >= 2")

        if expression is not None:
            try:
                treatment_dsl.parse(expression)
            except DslError as e:
                errors["treatment.expression"] = str(e)

        if errors:
            raise ManifestError(errors)

        return cls(
            seed=seed,
            treatment_column=column,
            treatment_expression=expression,
            outcome=outcome,
            history_days=history_days,
            reference_date=reference_date,
            dataset_id=raw.get("dataset_id"),
            base_features=base_features,
            train_fraction=float(train_fraction),
            bootstrap=BootstrapSettings(n_samples=n_samples, alpha=float(alpha)),
            match=match_cfg,
            selection=selection,
            overlap_trim_quantile=float(trim),
            correlation_threshold=float(corr),
            sensitivity=sens,
            bins=bins,
        )

    # -- schema binding ----------------------------------------------------

    def validate_against(self, schema: DatasetSchema) -> None:
        """Static binding against a dataset schema; raises ManifestError."""
        errors: dict[str, str] = {}

        if self.treatment_column is not None:
            if self.treatment_column == schema.treatment:
                pass
            else:
                try:
                    spec = schema.covariate(self.treatment_column)
                    if spec.kind != "binary":
                        errors["treatment.column"] = (
                            f"'{self.treatment_column}' is {spec.kind}; treatment needs "
                            "the declared treatment column or a binary covariate")
                except Exception:
                    errors["treatment.column"] = f"unknown column '{self.treatment_column}'"
        if self.treatment_expression is not None:
            try:
                expr = treatment_dsl.parse(self.treatment_expression)
                treatment_dsl.bind(expr, schema)
            except DslError as e:
                errors["treatment.expression"] = str(e)

        outcome = self.outcome
        if outcome is not None and outcome != schema.outcome:
            try:
                spec = schema.covariate(outcome)
                if spec.kind != "continuous":
                    errors["outcome"] = (f"'{outcome}' is {spec.kind}; the outcome metric must "
                                         "be the declared outcome or a continuous covariate")
            except Exception:
                errors["outcome"] = f"unknown column '{outcome}'"

        if self.history_days is not None and schema.date is None:
            errors["history_days"] = "dataset declares no date column; cannot window"

        if self.base_features is not None:
            claimed = {self.treatment_column, outcome}
            if self.treatment_expression is not None and \
                    "treatment.expression" not in errors:
                expr = treatment_dsl.parse(self.treatment_expression)
                claimed |= treatment_dsl.referenced_columns(expr)
            expanded = set()
            for spec in schema.covariates:
                if spec.name in claimed:
                    continue
                if spec.kind == "categorical":
                    expanded.update(f"{spec.name}={c}" for c in spec.categories[1:])
                else:
                    expanded.add(spec.name)
            for b in self.base_features:
                if b not in expanded:
                    errors["selection.base_features"] = f"'{b}' is not an available feature column"
                    break

        if errors:
            raise ManifestError(errors)

    # -- serialization -----------------------------------------------------

    def to_dict(self, include_dataset: bool = True) -> dict:
        d = {
            "seed": self.seed,
            "treatment": (
                {"column": self.treatment_column} if self.treatment_column is not None
                else {"expression": self.treatment_expression}
            ),
            "outcome": self.outcome,
            "history_days": self.history_days,
            "reference_date": None if self.reference_date is None else self.reference_date.isoformat(),
            "bootstrap": {"n_samples": self.bootstrap.n_samples, "alpha": self.bootstrap.alpha},
            "match": {
                "k": self.match.k,
                "with_replacement": self.match.with_replacement,
                "caliper": self.match.caliper,
                "caliper_scale": self.match.caliper_scale,
            },
            "selection": {
                "base_features": None if self.base_features is None else list(self.base_features),
                "train_fraction": self.train_fraction,
                "top_k": self.selection.top_k,
                "max_base_subset_size": self.selection.max_base_subset_size,
                "subset_budget": self.selection.subset_budget,
                "interaction_budget": self.selection.interaction_budget,
                "max_iter": self.selection.fit.max_iter,
                "tol": self.selection.fit.tol,
                "l2": self.selection.fit.l2,
            },
            "overlap_trim_quantile": self.overlap_trim_quantile,
            "correlation_threshold": self.correlation_threshold,
            "sensitivity": {
                "enabled": self.sensitivity.enabled,
                "replicates_per_w": self.sensitivity.replicates_per_w,
                "target": self.sensitivity.target,
            },
            "bins": self.bins,
        }
        if include_dataset:
            d["dataset_id"] = self.dataset_id
        return d

    def with_seed(self, seed: int) -> "RunManifest":
        return replace(self, seed=seed)
