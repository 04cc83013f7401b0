"""One-to-many nearest-neighbor matching on propensity scores and the
matched-contrast treatment effect on the treated.

Treated units are processed in descending propensity order; each receives
up to ``k`` controls within the caliper, nearest first, with equal score
gaps resolved by control unit id. Without replacement, controls are
consumed greedily in that processing order. Every ordering rule is total,
so a fixed input yields one possible output regardless of row order or
backend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .errors import MatchingError


@dataclass(frozen=True)
class MatchConfig:
    """Matching knobs. ``caliper=None`` resolves to
    ``caliper_scale * sd(logit(score))`` over the scores being matched,
    applied as a maximum absolute score gap."""

    k: int = 5
    with_replacement: bool = True
    caliper: float | None = None
    caliper_scale: float = 0.2

    def __post_init__(self):
        if self.k < 1:
            raise MatchingError("k must be >= 1")
        if self.caliper is not None and not self.caliper > 0:
            raise MatchingError("caliper must be > 0 when set")


@dataclass(frozen=True)
class MatchResult:
    """Per-treated matched control lists plus usage counts.

    ``pairs`` maps a matched treated unit id to its (control id, gap)
    list, nearest control first. ``att`` is filled by
    :func:`estimate_att`; it is None straight out of :func:`match`.
    """

    pairs: dict[str, tuple[tuple[str, float], ...]]
    unmatched_treated: tuple[str, ...]
    n_treated_matched: int
    n_control_used: int
    caliper_used: float | None
    att: float | None = None

    def to_dict(self) -> dict:
        return {
            "pairs": {t: [[c, g] for c, g in lst] for t, lst in sorted(self.pairs.items())},
            "unmatched_treated": list(self.unmatched_treated),
            "n_treated_matched": self.n_treated_matched,
            "n_control_used": self.n_control_used,
            "caliper_used": self.caliper_used,
            "att": self.att,
        }


def resolve_caliper(cfg: MatchConfig, scores: np.ndarray) -> float:
    """Concrete caliper value: explicit, or caliper_scale times the standard
    deviation of logit(score) over all units entering the match."""
    if cfg.caliper is not None:
        return float(cfg.caliper)
    s = np.asarray(scores, dtype=np.float64)
    logit = np.log(s / (1.0 - s))
    sd = float(logit.std(ddof=0))
    if sd == 0.0:
        return math.inf  # constant scores: caliper cannot discriminate
    return cfg.caliper_scale * sd


def _id_ranks(ids: Sequence[str]) -> np.ndarray:
    order = sorted(range(len(ids)), key=lambda i: ids[i])
    ranks = np.empty(len(ids), dtype=np.int64)
    for r, i in enumerate(order):
        ranks[i] = r
    return ranks


def match(treated_ids: Sequence[str], treated_scores: Sequence[float],
          control_ids: Sequence[str], control_scores: Sequence[float],
          cfg: MatchConfig) -> MatchResult:
    """Match each treated unit to its nearest controls by score gap.

    Raises :class:`MatchingError` only when every treated unit ends up
    unmatched; individual unmatched units are recorded, not fatal.
    """
    ts = np.asarray(treated_scores, dtype=np.float64)
    cs = np.asarray(control_scores, dtype=np.float64)
    if ts.size == 0 or cs.size == 0:
        raise MatchingError("both treated and control groups must be non-empty")
    for arr, label in ((ts, "treated"), (cs, "control")):
        if arr.min() <= 0.0 or arr.max() >= 1.0:
            raise MatchingError(f"{label} scores must lie strictly inside (0, 1)")

    caliper = resolve_caliper(cfg, np.concatenate([ts, cs]))

    t_rank = _id_ranks(treated_ids)
    c_rank = _id_ranks(control_ids)

    # processing order: descending score, ties by id rank
    t_order = np.lexsort((t_rank, -ts))
    # controls ascending by (score, id rank)
    c_order = np.lexsort((c_rank, cs))
    cs_sorted = cs[c_order]
    c_rank_sorted = c_rank[c_order]

    out_idx, out_gap = kernels.knn_match(
        ts[t_order], cs_sorted, c_rank_sorted,
        cfg.k, caliper, cfg.with_replacement,
    )

    pairs: dict[str, tuple[tuple[str, float], ...]] = {}
    matched_mask = np.zeros(ts.size, dtype=bool)
    used_controls: set[str] = set()
    for row, ti in enumerate(t_order):
        lst = []
        for col in range(cfg.k):
            pos = out_idx[row, col]
            if pos < 0:
                break
            cid = control_ids[c_order[pos]]
            lst.append((cid, float(out_gap[row, col])))
            used_controls.add(cid)
        if lst:
            pairs[treated_ids[ti]] = tuple(lst)
            matched_mask[ti] = True

    if not pairs:
        raise MatchingError(
            f"no treated unit found a control within caliper {caliper:.6g}")

    unmatched = tuple(treated_ids[i] for i in range(ts.size) if not matched_mask[i])
    return MatchResult(
        pairs=pairs,
        unmatched_treated=unmatched,
        n_treated_matched=len(pairs),
        n_control_used=len(used_controls),
        caliper_used=None if math.isinf(caliper) else float(caliper),
    )


def matched_att_arrays(treated_scores: np.ndarray, control_scores: np.ndarray,
                       treated_y: np.ndarray, control_y: np.ndarray,
                       cfg: MatchConfig) -> tuple[float, int]:
    """Array fast path for bootstrap replicates: same kernel, same ordering
    rules with positional ranks as ids, ATT computed without building the
    per-pair report. Returns (att, n_treated_matched)."""
    ts = np.asarray(treated_scores, dtype=np.float64)
    cs = np.asarray(control_scores, dtype=np.float64)
    if ts.size == 0 or cs.size == 0:
        raise MatchingError("both treated and control groups must be non-empty")
    caliper = resolve_caliper(cfg, np.concatenate([ts, cs]))

    t_order = np.lexsort((np.arange(ts.size), -ts))
    c_order = np.lexsort((np.arange(cs.size), cs))
    cs_sorted = cs[c_order]

    out_idx, _ = kernels.knn_match(
        ts[t_order], cs_sorted, np.arange(cs.size, dtype=np.int64),
        cfg.k, caliper, cfg.with_replacement,
    )
    valid = out_idx >= 0
    counts = valid.sum(axis=1)
    matched = counts > 0
    n_matched = int(matched.sum())
    if n_matched == 0:
        raise MatchingError(
            f"no treated unit found a control within caliper {caliper:.6g}")
    y_ctrl_sorted = control_y[c_order]
    sums = np.where(valid, y_ctrl_sorted[np.where(valid, out_idx, 0)], 0.0).sum(axis=1)
    control_means = sums[matched] / counts[matched]
    contrasts = treated_y[t_order][matched] - control_means
    return float(contrasts.mean()), n_matched


def estimate_att(outcomes: Mapping[str, float],
                 pairs: Mapping[str, Sequence[tuple[str, float]]]) -> float:
    """Mean over matched treated units of (own outcome minus the mean
    outcome of its matched controls)."""
    if not pairs:
        raise MatchingError("cannot estimate ATT with zero matched treated units")
    contrasts = []
    for tid, lst in pairs.items():
        control_mean = sum(outcomes[cid] for cid, _ in lst) / len(lst)
        contrasts.append(outcomes[tid] - control_mean)
    return float(sum(contrasts) / len(contrasts))


def with_att(result: MatchResult, outcomes: Mapping[str, float]) -> MatchResult:
    return replace(result, att=estimate_att(outcomes, result.pairs))
