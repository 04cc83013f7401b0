"""Post-matching quality diagnostics as plot-ready data.

Everything here is serialized for direct charting in the UI: balance table
rows for the love plot, fixed-bin histograms for densities and propensity
distributions, contingency tables, and per-covariate summaries. Bin edges
are computed once from the pre-matching pooled sample and reused for the
post-matching series, so before/after pairs always share edges.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import betainc

from .dataset import AnalysisDataset
from .errors import DiagnosticsError
from .matching import MatchResult
from .propensity import FeatureSet, FeatureTable, _design_raw

#: conventional balance reference line carried to the love plot
BALANCE_THRESHOLD = 0.1


def smd(treated: Sequence[float], control: Sequence[float],
        denominator_sd: float | None = None) -> float:
    """Standardized mean difference (mean_t - mean_c) / pooled sd.

    The pooled sd is sqrt((var_t + var_c) / 2) with n-1 variances; a group
    of size one contributes zero variance. ``denominator_sd`` overrides the
    denominator, which the balance table uses to keep the pre-matching
    scale for post-matching rows (the standard love-plot convention).
    """
    t = np.asarray(treated, dtype=np.float64)
    c = np.asarray(control, dtype=np.float64)
    if t.size == 0 or c.size == 0:
        raise DiagnosticsError("smd requires non-empty groups")
    if denominator_sd is None:
        denominator_sd = pooled_sd(t, c)
    diff = float(t.mean() - c.mean())
    if denominator_sd == 0.0:
        if diff == 0.0:
            return 0.0
        raise DiagnosticsError("zero pooled variance with unequal means")
    return diff / denominator_sd


def pooled_sd(t: np.ndarray, c: np.ndarray) -> float:
    vt = float(np.var(t, ddof=1)) if t.size > 1 else 0.0
    vc = float(np.var(c, ddof=1)) if c.size > 1 else 0.0
    return float(np.sqrt((vt + vc) / 2.0))


def welch_ttest(treated: Sequence[float], control: Sequence[float]) -> tuple[float, float]:
    """Welch's t statistic with Welch-Satterthwaite degrees of freedom and
    a two-sided p-value from the Student-t CDF (regularized incomplete
    beta)."""
    t_vals = np.asarray(treated, dtype=np.float64)
    c_vals = np.asarray(control, dtype=np.float64)
    if t_vals.size < 2 or c_vals.size < 2:
        raise DiagnosticsError("welch_ttest requires >= 2 values per group")
    nt, nc = t_vals.size, c_vals.size
    vt = float(np.var(t_vals, ddof=1))
    vc = float(np.var(c_vals, ddof=1))
    if vt == 0.0 and vc == 0.0:
        raise DiagnosticsError("degenerate variance in both groups")
    se2 = vt / nt + vc / nc
    t_stat = float(t_vals.mean() - c_vals.mean()) / np.sqrt(se2)
    df = se2 ** 2 / ((vt / nt) ** 2 / (nt - 1) + (vc / nc) ** 2 / (nc - 1))
    # two-sided: P(|T_df| > |t|) = I_{df/(df+t^2)}(df/2, 1/2)
    p = float(betainc(df / 2.0, 0.5, df / (df + t_stat ** 2)))
    return float(t_stat), p


@dataclass(frozen=True)
class BalanceRow:
    """Love-plot row for one model feature column."""

    name: str
    smd_before: float | None
    smd_after: float | None
    t_before: float | None
    p_before: float | None
    t_after: float | None
    p_after: float | None
    note: str | None = None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "smd_before": self.smd_before, "smd_after": self.smd_after,
            "ttest_before": [self.t_before, self.p_before],
            "ttest_after": [self.t_after, self.p_after],
            "note": self.note,
        }


@dataclass(frozen=True)
class HistogramSeries:
    """Shared-edge histogram counts for the four (group x phase) series."""

    name: str
    edges: tuple[float, ...]
    treated_before: tuple[int, ...]
    control_before: tuple[int, ...]
    treated_after: tuple[int, ...]
    control_after: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "edges": list(self.edges),
            "treated_before": list(self.treated_before),
            "control_before": list(self.control_before),
            "treated_after": list(self.treated_after),
            "control_after": list(self.control_after),
        }


@dataclass(frozen=True)
class ContingencyTable:
    name: str
    categories: tuple[str, ...]
    treated_before: tuple[int, ...]
    control_before: tuple[int, ...]
    treated_after: tuple[int, ...]
    control_after: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "categories": list(self.categories),
            "treated_before": list(self.treated_before),
            "control_before": list(self.control_before),
            "treated_after": list(self.treated_after),
            "control_after": list(self.control_after),
        }


@dataclass(frozen=True)
class DiagnosticsBundle:
    balance: tuple[BalanceRow, ...]
    balance_threshold: float
    densities: tuple[HistogramSeries, ...]
    score_hist: HistogramSeries
    contingency: tuple[ContingencyTable, ...]
    summary: dict[str, dict]

    def to_dict(self) -> dict:
        return {
            "balance": [r.to_dict() for r in self.balance],
            "balance_threshold": self.balance_threshold,
            "densities": [h.to_dict() for h in self.densities],
            "score_hist": self.score_hist.to_dict(),
            "contingency": [c.to_dict() for c in self.contingency],
            "summary": self.summary,
        }


def _counts(values: np.ndarray, edges: np.ndarray) -> tuple[int, ...]:
    counts, _ = np.histogram(values, bins=edges)
    return tuple(int(c) for c in counts)


def _five_numbers(values: np.ndarray) -> dict:
    if values.size == 0:
        return {"n": 0}
    q25, q50, q75 = np.quantile(values, [0.25, 0.5, 0.75])
    return {
        "n": int(values.size),
        "mean": float(values.mean()),
        "sd": float(values.std(ddof=1)) if values.size > 1 else 0.0,
        "q25": float(q25), "median": float(q50), "q75": float(q75),
    }


def build_bundle(ds: AnalysisDataset, treatment: np.ndarray, scores: np.ndarray,
                 match_result: MatchResult, feature_table: FeatureTable,
                 feature_set: FeatureSet, bins: int | str = 30) -> DiagnosticsBundle:
    """Assemble the full diagnostics bundle.

    ``ds``/``treatment``/``scores``/``feature_table`` must be row-aligned
    and already restricted to the in-support sample ("before" = everything
    given here). The "after" sample is the matched treated units plus their
    matched controls, controls repeated once per appearance.

    A failing balance statistic annotates its row instead of aborting the
    bundle.
    """
    d = np.asarray(treatment)
    row_of = {uid: i for i, uid in enumerate(ds.unit_ids)}

    treated_rows_after = np.array([row_of[t] for t in match_result.pairs], dtype=np.int64)
    control_rows_after = np.array(
        [row_of[cid] for lst in match_result.pairs.values() for cid, _ in lst],
        dtype=np.int64,
    )
    if treated_rows_after.size == 0:
        raise DiagnosticsError("match result has no matched treated units")

    t_before = np.flatnonzero(d == 1)
    c_before = np.flatnonzero(d == 0)

    # balance rows over the model's design columns (base + interactions)
    design, _ = _design_raw(feature_table, feature_set)
    balance: list[BalanceRow] = []
    for j, name in enumerate(feature_set.feature_names):
        col = design[:, j]
        tb, cb = col[t_before], col[c_before]
        ta, ca = col[treated_rows_after], col[control_rows_after]
        note = None
        smd_b = smd_a = t_b = p_b = t_a = p_a = None
        try:
            denom = pooled_sd(tb, cb)
            smd_b = smd(tb, cb, denominator_sd=denom)
            smd_a = smd(ta, ca, denominator_sd=denom)
        except DiagnosticsError as e:
            note = str(e)
        try:
            t_b, p_b = welch_ttest(tb, cb)
            t_a, p_a = welch_ttest(ta, ca)
        except DiagnosticsError as e:
            note = note or str(e)
        balance.append(BalanceRow(name=name, smd_before=smd_b, smd_after=smd_a,
                                  t_before=t_b, p_before=p_b,
                                  t_after=t_a, p_after=p_a, note=note))

    # densities for continuous covariates, shared edges from pooled before-data
    densities: list[HistogramSeries] = []
    for spec in ds.covariates:
        if spec.kind != "continuous":
            continue
        col = ds.columns[spec.name]
        edges = np.histogram_bin_edges(col, bins=bins)
        densities.append(HistogramSeries(
            name=spec.name,
            edges=tuple(float(e) for e in edges),
            treated_before=_counts(col[t_before], edges),
            control_before=_counts(col[c_before], edges),
            treated_after=_counts(col[treated_rows_after], edges),
            control_after=_counts(col[control_rows_after], edges),
        ))

    # propensity scores always bin over the full [0, 1] range
    n_score_bins = bins if isinstance(bins, int) else 30
    score_edges = np.linspace(0.0, 1.0, n_score_bins + 1)
    score_hist = HistogramSeries(
        name="propensity_score",
        edges=tuple(float(e) for e in score_edges),
        treated_before=_counts(scores[t_before], score_edges),
        control_before=_counts(scores[c_before], score_edges),
        treated_after=_counts(scores[treated_rows_after], score_edges),
        control_after=_counts(scores[control_rows_after], score_edges),
    )

    contingency: list[ContingencyTable] = []
    for spec in ds.covariates:
        if spec.kind != "categorical":
            continue
        col = ds.columns[spec.name]

        def tab(rows: np.ndarray) -> tuple[int, ...]:
            vals = col[rows]
            return tuple(int(np.sum(vals == cat)) for cat in spec.categories)

        contingency.append(ContingencyTable(
            name=spec.name, categories=spec.categories,
            treated_before=tab(t_before), control_before=tab(c_before),
            treated_after=tab(treated_rows_after), control_after=tab(control_rows_after),
        ))

    summary: dict[str, dict] = {}
    for spec in ds.covariates:
        if spec.kind == "categorical":
            continue
        col = ds.columns[spec.name]
        summary[spec.name] = {
            "treated_before": _five_numbers(col[t_before]),
            "control_before": _five_numbers(col[c_before]),
            "treated_after": _five_numbers(col[treated_rows_after]),
            "control_after": _five_numbers(col[control_rows_after]),
        }

    return DiagnosticsBundle(
        balance=tuple(balance),
        balance_threshold=BALANCE_THRESHOLD,
        densities=tuple(densities),
        score_hist=score_hist,
        contingency=tuple(contingency),
        summary=summary,
    )
