"""Tabular ingestion, typing, and assumption checks.

A dataset is an immutable set of unit rows with typed covariates, a numeric
outcome, an optional binary treatment column, and an optional per-row
observation date. Ingestion is strict: missing values, unparseable cells,
duplicate unit ids and non-binary treatments are rejected, never repaired.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import RowError, SchemaError

COVARIATE_KINDS = ("continuous", "binary", "categorical")

#: reserved roles a covariate name may not collide with
_ROLE_FIELDS = ("unit_id", "outcome", "treatment", "date")


@dataclass(frozen=True)
class CovariateSpec:
    """Declared type of one covariate column."""

    name: str
    kind: str
    categories: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in COVARIATE_KINDS:
            raise SchemaError(f"unknown covariate kind '{self.kind}' for '{self.name}'")
        object.__setattr__(self, "categories", tuple(self.categories))
        if self.kind == "categorical":
            if len(self.categories) < 2:
                raise SchemaError(f"categorical '{self.name}' needs >= 2 categories")
            if len(set(self.categories)) != len(self.categories):
                raise SchemaError(f"categorical '{self.name}' has duplicate categories")
        elif self.categories:
            raise SchemaError(f"covariate '{self.name}' is {self.kind} but declares categories")

    def to_dict(self) -> dict:
        d = {"name": self.name, "kind": self.kind}
        if self.kind == "categorical":
            d["categories"] = list(self.categories)
        return d


@dataclass(frozen=True)
class DatasetSchema:
    """JSON sidecar declaring column roles and covariate kinds."""

    covariates: tuple[CovariateSpec, ...]
    outcome: str
    treatment: str | None = None
    date: str | None = None
    unit_id: str = "unit_id"

    def __post_init__(self):
        object.__setattr__(self, "covariates", tuple(self.covariates))
        names = [c.name for c in self.covariates]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})[0]
            raise SchemaError(f"duplicate covariate name '{dup}'")
        roles = {"unit_id": self.unit_id, "outcome": self.outcome,
                 "treatment": self.treatment, "date": self.date}
        taken: dict[str, str] = {}
        for role, col in roles.items():
            if col is None:
                continue
            if col in taken:
                raise SchemaError(f"column '{col}' declared as both {taken[col]} and {role}")
            taken[col] = role
        for n in names:
            if n in taken:
                raise SchemaError(f"covariate '{n}' collides with the {taken[n]} column")

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSchema":
        try:
            covs = tuple(
                CovariateSpec(
                    name=c["name"], kind=c["kind"],
                    categories=tuple(c.get("categories", ())),
                )
                for c in d["covariates"]
            )
            return cls(
                covariates=covs,
                outcome=d["outcome"],
                treatment=d.get("treatment"),
                date=d.get("date"),
                unit_id=d.get("unit_id", "unit_id"),
            )
        except KeyError as e:
            raise SchemaError(f"schema missing required key {e}") from None

    @classmethod
    def from_json_file(cls, path: Path | str) -> "DatasetSchema":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise SchemaError(f"schema file is not valid JSON: {e}") from None
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return {
            "unit_id": self.unit_id,
            "outcome": self.outcome,
            "treatment": self.treatment,
            "date": self.date,
            "covariates": [c.to_dict() for c in self.covariates],
        }

    def covariate(self, name: str) -> CovariateSpec:
        for c in self.covariates:
            if c.name == name:
                return c
        raise SchemaError(f"unknown covariate '{name}'")


@dataclass(frozen=True, eq=False)
class AnalysisDataset:
    """Immutable, fully validated unit-level table.

    ``columns`` maps every covariate plus the outcome (and treatment when
    declared) to a row-aligned array: float64 for numeric columns, unicode
    for categoricals. Arrays are write-protected after construction.
    """

    schema: DatasetSchema
    unit_ids: tuple[str, ...]
    columns: dict[str, np.ndarray]
    dates: np.ndarray | None = None  # datetime64[D], row-aligned

    def __post_init__(self):
        for arr in self.columns.values():
            arr.setflags(write=False)
        if self.dates is not None:
            self.dates.setflags(write=False)

    # -- basics ---------------------------------------------------------

    @property
    def n_units(self) -> int:
        return len(self.unit_ids)

    @property
    def covariates(self) -> tuple[CovariateSpec, ...]:
        return self.schema.covariates

    @property
    def outcome(self) -> np.ndarray:
        return self.columns[self.schema.outcome]

    @property
    def treatment(self) -> np.ndarray | None:
        if self.schema.treatment is None:
            return None
        return self.columns[self.schema.treatment]

    def __eq__(self, other) -> bool:
        if not isinstance(other, AnalysisDataset):
            return NotImplemented
        if self.schema != other.schema or self.unit_ids != other.unit_ids:
            return False
        if set(self.columns) != set(other.columns):
            return False
        for k, v in self.columns.items():
            if not np.array_equal(v, other.columns[k]):
                return False
        if (self.dates is None) != (other.dates is None):
            return False
        return self.dates is None or bool(np.array_equal(self.dates, other.dates))

    # -- feature expansion ----------------------------------------------

    def expanded_feature_columns(self) -> dict[str, np.ndarray]:
        """One-hot-expanded covariate matrix columns.

        Continuous and binary covariates pass through; a categorical with
        declared categories (c0, c1, ...) expands to indicator columns
        ``name=c1`` ... with the first declared category as reference level.
        Insertion order follows the schema, so downstream enumeration is
        deterministic.
        """
        out: dict[str, np.ndarray] = {}
        for spec in self.schema.covariates:
            col = self.columns[spec.name]
            if spec.kind == "categorical":
                for cat in spec.categories[1:]:
                    out[f"{spec.name}={cat}"] = (col == cat).astype(np.float64)
            else:
                out[spec.name] = col.astype(np.float64)
        return out

    def take(self, indices: np.ndarray) -> "AnalysisDataset":
        """Row subset / reindex preserving schema; used by window filtering
        and bootstrap resampling. Does not re-check invariants."""
        idx = np.asarray(indices)
        return AnalysisDataset(
            schema=self.schema,
            unit_ids=tuple(self.unit_ids[i] for i in idx),
            columns={k: v[idx].copy() for k, v in self.columns.items()},
            dates=None if self.dates is None else self.dates[idx].copy(),
        )

    # -- serialization ---------------------------------------------------

    def save(self, csv_path: Path | str, schema_path: Path | str) -> None:
        """Write the dataset back to CSV + schema sidecar. Ingesting the
        written pair reproduces this dataset exactly (round-trip)."""
        csv_path, schema_path = Path(csv_path), Path(schema_path)
        header = [self.schema.unit_id]
        if self.schema.date is not None:
            header.append(self.schema.date)
        header.append(self.schema.outcome)
        if self.schema.treatment is not None:
            header.append(self.schema.treatment)
        header.extend(c.name for c in self.schema.covariates)

        with csv_path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for i in range(self.n_units):
                row: list[str] = [self.unit_ids[i]]
                if self.schema.date is not None:
                    row.append(str(self.dates[i]))
                row.append(_fmt_number(self.outcome[i]))
                if self.schema.treatment is not None:
                    row.append(str(int(self.treatment[i])))
                for spec in self.schema.covariates:
                    v = self.columns[spec.name][i]
                    if spec.kind == "categorical":
                        row.append(str(v))
                    elif spec.kind == "binary":
                        row.append(str(int(v)))
                    else:
                        row.append(_fmt_number(v))
                w.writerow(row)
        schema_path.write_text(
            json.dumps(self.schema.to_dict(), indent=2, sort_keys=True), encoding="utf-8"
        )


def _fmt_number(x: float) -> str:
    """Shortest round-trip decimal; integers stay integral-looking."""
    return repr(float(x))


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------

def ingest(path: Path | str, schema: DatasetSchema) -> AnalysisDataset:
    """Read a UTF-8, comma-delimited, RFC 4180 CSV with a header row and
    build a validated dataset.

    Raises:
        SchemaError: missing column, duplicate unit id, non-binary or
            one-sided treatment, empty file.
        RowError: unparseable cell, missing value, undeclared category
            (all with the 1-based data row index).
    """
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"no such file: {path}")
    with path.open("r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty file: no header row") from None
        rows = list(reader)
    return ingest_rows(header, rows, schema)


def ingest_rows(header: Sequence[str], rows: Iterable[Sequence[str]],
                schema: DatasetSchema) -> AnalysisDataset:
    """Core of :func:`ingest`, shared with the upload endpoint."""
    col_index: dict[str, int] = {}
    for i, name in enumerate(header):
        col_index.setdefault(name, i)

    needed = [schema.unit_id, schema.outcome]
    if schema.treatment is not None:
        needed.append(schema.treatment)
    if schema.date is not None:
        needed.append(schema.date)
    needed.extend(c.name for c in schema.covariates)
    for name in needed:
        if name not in col_index:
            raise SchemaError(f"missing column '{name}'")

    rows = [list(r) for r in rows]
    n = len(rows)
    if n == 0:
        raise SchemaError("no data rows")
    width = len(header)
    for i, r in enumerate(rows):
        if len(r) != width:
            raise RowError(f"expected {width} fields, found {len(r)}", row=i + 1)

    def cell(i: int, name: str) -> str:
        raw = rows[i][col_index[name]]
        if raw == "":
            raise RowError("missing value", row=i + 1, column=name)
        return raw

    # unit ids: unique, non-empty
    unit_ids = [cell(i, schema.unit_id) for i in range(n)]
    seen: set[str] = set()
    for uid in unit_ids:
        if uid in seen:
            raise SchemaError(f"duplicate unit_id '{uid}'")
        seen.add(uid)

    columns: dict[str, np.ndarray] = {}

    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        out[i] = _parse_float(cell(i, schema.outcome), i, schema.outcome)
        if not math.isfinite(out[i]):
            raise RowError("outcome not finite", row=i + 1, column=schema.outcome)
    columns[schema.outcome] = out

    if schema.treatment is not None:
        d = np.empty(n, dtype=np.float64)
        for i in range(n):
            v = _parse_float(cell(i, schema.treatment), i, schema.treatment)
            if v not in (0.0, 1.0):
                raise RowError(f"treatment not binary: value '{rows[i][col_index[schema.treatment]]}'",
                               row=i + 1, column=schema.treatment)
            d[i] = v
        _require_two_sided(d, schema.treatment)
        columns[schema.treatment] = d

    dates = None
    if schema.date is not None:
        parsed = np.empty(n, dtype="datetime64[D]")
        for i in range(n):
            raw = cell(i, schema.date)
            try:
                parsed[i] = np.datetime64(dt.date.fromisoformat(raw), "D")
            except ValueError:
                raise RowError(f"invalid ISO date '{raw}'", row=i + 1, column=schema.date) from None
        dates = parsed

    for spec in schema.covariates:
        if spec.kind == "categorical":
            cats = set(spec.categories)
            vals = []
            for i in range(n):
                raw = cell(i, spec.name)
                if raw not in cats:
                    raise RowError(f"value '{raw}' not among declared categories",
                                   row=i + 1, column=spec.name)
                vals.append(raw)
            columns[spec.name] = np.array(vals, dtype=str)
        else:
            arr = np.empty(n, dtype=np.float64)
            for i in range(n):
                arr[i] = _parse_float(cell(i, spec.name), i, spec.name)
                if spec.kind == "binary" and arr[i] not in (0.0, 1.0):
                    raise RowError(f"binary covariate value '{rows[i][col_index[spec.name]]}' not in {{0,1}}",
                                   row=i + 1, column=spec.name)
                if not math.isfinite(arr[i]):
                    raise RowError("value not finite", row=i + 1, column=spec.name)
            columns[spec.name] = arr

    return AnalysisDataset(schema=schema, unit_ids=tuple(unit_ids),
                           columns=columns, dates=dates)


def _parse_float(raw: str, i: int, column: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise RowError(f"cannot parse '{raw}' as a number", row=i + 1, column=column) from None


def _require_two_sided(d: np.ndarray, name: str) -> None:
    if not ((d == 0.0).any() and (d == 1.0).any()):
        side = int(d[0]) if len(d) else "?"
        raise SchemaError(f"treatment '{name}' is one-sided: every row has value {side}")


# ---------------------------------------------------------------------------
# window filtering
# ---------------------------------------------------------------------------

def filter_by_window(ds: AnalysisDataset, history_days: int,
                     reference_date: dt.date) -> AnalysisDataset:
    """Retain rows with ``reference_date - observation_date < history_days``.

    Idempotent for fixed arguments. All dataset invariants are re-checked;
    in particular a treatment that becomes one-sided inside the window is
    an error here rather than a silent downstream failure.
    """
    if history_days < 1:
        raise SchemaError("history_days must be >= 1")
    if ds.dates is None:
        raise SchemaError("dataset has no observation date column; cannot window")
    ref = np.datetime64(reference_date, "D")
    age_days = (ref - ds.dates).astype("timedelta64[D]").astype(np.int64)
    keep = np.flatnonzero(age_days < history_days)
    if keep.size == 0:
        raise SchemaError(f"no rows in window (history_days={history_days}, reference={reference_date})")
    sub = ds.take(keep)
    if sub.treatment is not None:
        _require_two_sided(sub.treatment, ds.schema.treatment)
    return sub


# ---------------------------------------------------------------------------
# overlap / common support
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GroupScoreSummary:
    n: int
    minimum: float
    maximum: float
    support_lo: float  # trim_quantile quantile
    support_hi: float  # 1 - trim_quantile quantile
    q25: float
    median: float
    q75: float


@dataclass(frozen=True)
class OverlapResult:
    """Common-support verdict over two propensity score samples."""

    overlap_pass: bool
    trim_quantile: float
    treated: GroupScoreSummary
    control: GroupScoreSummary
    common_lo: float
    common_hi: float


def check_overlap(scores_treated: Sequence[float], scores_control: Sequence[float],
                  trim_quantile: float = 0.01) -> OverlapResult:
    """Check that the trimmed score ranges of the two groups intersect.

    The check passes iff ``[q(trim), q(1-trim)]`` of the treated scores
    intersects the same range of the control scores. A failed check is a
    valid report, not an error.
    """
    t = np.asarray(scores_treated, dtype=np.float64)
    c = np.asarray(scores_control, dtype=np.float64)
    if t.size == 0 or c.size == 0:
        raise SchemaError("check_overlap requires non-empty score groups")
    for arr, label in ((t, "treated"), (c, "control")):
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise SchemaError(f"{label} scores outside [0, 1]")
    if not 0.0 <= trim_quantile < 0.5:
        raise SchemaError("trim_quantile must be in [0, 0.5)")

    def summarize(arr: np.ndarray) -> GroupScoreSummary:
        lo, hi = np.quantile(arr, [trim_quantile, 1.0 - trim_quantile])
        q25, med, q75 = np.quantile(arr, [0.25, 0.5, 0.75])
        return GroupScoreSummary(
            n=int(arr.size), minimum=float(arr.min()), maximum=float(arr.max()),
            support_lo=float(lo), support_hi=float(hi),
            q25=float(q25), median=float(med), q75=float(q75),
        )

    st, sc = summarize(t), summarize(c)
    common_lo = max(st.support_lo, sc.support_lo)
    common_hi = min(st.support_hi, sc.support_hi)
    return OverlapResult(
        overlap_pass=bool(common_lo <= common_hi),
        trim_quantile=float(trim_quantile),
        treated=st, control=sc,
        common_lo=float(common_lo), common_hi=float(common_hi),
    )


# ---------------------------------------------------------------------------
# correlation screen
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CorrelationWarning:
    first: str
    second: str
    r: float


@dataclass(frozen=True)
class ScreenResult:
    consolidation_warnings: tuple[CorrelationWarning, ...]
    degenerate_columns: tuple[str, ...]


def correlation_screen(ds: AnalysisDataset, threshold: float = 0.9) -> ScreenResult:
    """Flag covariate pairs (after one-hot expansion) with |Pearson r| at or
    above ``threshold``; zero-variance columns are reported separately.

    The tool only warns: consolidating correlated variables is a judgment
    call left to the analyst.
    """
    if not 0.0 < threshold < 1.0:
        raise SchemaError("correlation threshold must be in (0, 1)")
    if ds.n_units < 2:
        raise SchemaError("correlation screen needs >= 2 rows")
    cols = ds.expanded_feature_columns()
    names = list(cols)
    degenerate = tuple(n for n in names if float(np.std(cols[n])) == 0.0)
    live = [n for n in names if n not in degenerate]
    warnings: list[CorrelationWarning] = []
    if len(live) >= 2:
        mat = np.corrcoef(np.stack([cols[n] for n in live]))
        for i in range(len(live)):
            for j in range(i + 1, len(live)):
                r = float(mat[i, j])
                if abs(r) >= threshold:
                    warnings.append(CorrelationWarning(live[i], live[j], r))
    return ScreenResult(tuple(warnings), degenerate)


@dataclass(frozen=True)
class ValidationReport:
    """Assembled assumption-check report for one analysis run."""

    overlap_pass: bool
    overlap: OverlapResult
    consolidation_warnings: tuple[CorrelationWarning, ...]
    degenerate_columns: tuple[str, ...]
    n_excluded_off_support: int = 0
