"""Propensity model fitting, evaluation, and exhaustive model selection.

The propensity of a unit is P(D=1 | X), estimated with ridge-penalized
logistic regression fitted by iteratively reweighted least squares (IRLS,
i.e. Newton steps with step-halving). Model selection enumerates every
non-empty subset of the base features, keeps the top candidates by held-out
AUC, then enumerates added pairwise interactions for those finalists.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dataset import AnalysisDataset
from .errors import EvaluationError, FitError, SchemaError, SelectionBudgetError

#: RNG stream tags; every random draw in the workbench is keyed
#: (seed, stream, ...) so parallel execution cannot reorder randomness.
STREAM_SPLIT = 1
STREAM_BOOTSTRAP = 2
STREAM_SENSITIVITY = 3


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


SCORE_EPS = 1e-12


# ---------------------------------------------------------------------------
# feature table
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeatureTable:
    """Row-aligned expanded covariate columns plus their scaling class.

    ``kinds[name]`` is ``"continuous"`` (standardized at fit time) or
    ``"indicator"`` (0/1, left unscaled).
    """

    columns: dict[str, np.ndarray]
    kinds: dict[str, str]

    @classmethod
    def from_dataset(cls, ds: AnalysisDataset) -> "FeatureTable":
        cols = ds.expanded_feature_columns()
        kinds: dict[str, str] = {}
        for spec in ds.covariates:
            if spec.kind == "categorical":
                for cat in spec.categories[1:]:
                    kinds[f"{spec.name}={cat}"] = "indicator"
            elif spec.kind == "binary":
                kinds[spec.name] = "indicator"
            else:
                kinds[spec.name] = "continuous"
        return cls(columns=cols, kinds=kinds)

    @property
    def n_rows(self) -> int:
        return len(next(iter(self.columns.values())))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.columns)

    def subset(self, row_idx: np.ndarray) -> "FeatureTable":
        return FeatureTable(
            columns={k: v[row_idx] for k, v in self.columns.items()},
            kinds=self.kinds,
        )

    def with_column(self, name: str, values: np.ndarray,
                    kind: str = "continuous") -> "FeatureTable":
        if name in self.columns:
            raise SchemaError(f"feature '{name}' already exists")
        cols = dict(self.columns)
        cols[name] = values
        kinds = dict(self.kinds)
        kinds[name] = kind
        return FeatureTable(columns=cols, kinds=kinds)


# ---------------------------------------------------------------------------
# feature sets and design matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeatureSet:
    """A candidate model: base feature columns plus pairwise interactions."""

    base_features: tuple[str, ...]
    interactions: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "base_features", tuple(self.base_features))
        pairs = tuple(tuple(sorted(p)) for p in self.interactions)
        object.__setattr__(self, "interactions", pairs)
        if not self.base_features:
            raise FitError("feature set must contain at least one base feature")
        if len(set(self.base_features)) != len(self.base_features):
            raise FitError("duplicate base feature")
        if len(set(pairs)) != len(pairs):
            raise FitError("duplicate interaction pair")
        base = set(self.base_features)
        for a, b in pairs:
            if a == b or a not in base or b not in base:
                raise FitError(f"interaction ({a}, {b}) not drawn from base features")

    @property
    def feature_names(self) -> tuple[str, ...]:
        return self.base_features + tuple(f"{a}*{b}" for a, b in self.interactions)

    @property
    def n_features(self) -> int:
        return len(self.base_features) + len(self.interactions)


def _design_raw(table: FeatureTable, fs: FeatureSet) -> tuple[np.ndarray, list[bool]]:
    """Raw (unstandardized) design columns and a per-column standardize flag.

    Interactions inherit "continuous" when either member is continuous;
    a product of two indicators stays an indicator.
    """
    cols = []
    standardize = []
    for name in fs.base_features:
        if name not in table.columns:
            raise FitError(f"feature '{name}' not present in the dataset")
        cols.append(table.columns[name])
        standardize.append(table.kinds[name] == "continuous")
    for a, b in fs.interactions:
        cols.append(table.columns[a] * table.columns[b])
        standardize.append(table.kinds[a] == "continuous" or table.kinds[b] == "continuous")
    return np.column_stack(cols), standardize


@dataclass(frozen=True)
class PropensityModel:
    """Fitted logistic propensity model.

    Coefficients live on the standardized scale recorded in ``means``/``sds``
    (indicator columns carry mean 0, sd 1, i.e. no rescaling). There are
    exactly ``len(feature_names) + 1`` coefficients counting the intercept.
    """

    feature_set: FeatureSet
    feature_names: tuple[str, ...]
    intercept: float
    coefs: np.ndarray
    means: np.ndarray
    sds: np.ndarray
    converged: bool
    n_iter: int
    log_likelihood: float

    def __post_init__(self):
        for arr in (self.coefs, self.means, self.sds):
            arr.setflags(write=False)

    def coefficients_by_name(self) -> dict[str, float]:
        out = {"(intercept)": float(self.intercept)}
        out.update({n: float(c) for n, c in zip(self.feature_names, self.coefs)})
        return out

    def to_dict(self) -> dict:
        return {
            "base_features": list(self.feature_set.base_features),
            "interactions": [list(p) for p in self.feature_set.interactions],
            "coefficients": self.coefficients_by_name(),
            "standardization": {
                n: {"mean": float(m), "sd": float(s)}
                for n, m, s in zip(self.feature_names, self.means, self.sds)
            },
            "converged": self.converged,
            "n_iter": self.n_iter,
            "log_likelihood": float(self.log_likelihood),
        }


@dataclass(frozen=True)
class FitConfig:
    max_iter: int = 100
    tol: float = 1e-8
    l2: float = 1e-6


def penalized_loglik(design: np.ndarray, y: np.ndarray, beta: np.ndarray,
                     penalty: np.ndarray) -> float:
    """Ridge-penalized Bernoulli log-likelihood; ``design`` includes the
    intercept column and ``penalty`` is per-coefficient (0 for intercept)."""
    eta = design @ beta
    ll = float(np.sum(y * eta - np.logaddexp(0.0, eta)))
    return ll - 0.5 * float(np.sum(penalty * beta * beta))


def loglik_gradient(design: np.ndarray, y: np.ndarray, beta: np.ndarray,
                    penalty: np.ndarray) -> np.ndarray:
    """Analytic score vector of :func:`penalized_loglik`."""
    p = sigmoid(design @ beta)
    return design.T @ (y - p) - penalty * beta


def fit(table: FeatureTable, labels: np.ndarray, feature_set: FeatureSet,
        config: FitConfig = FitConfig(), init: np.ndarray | None = None) -> PropensityModel:
    """Maximize the ridge-penalized Bernoulli log-likelihood by IRLS.

    Continuous columns are standardized to mean 0 / sd 1 with statistics
    from these fit rows; indicator columns pass through. The ridge penalty
    applies to every feature coefficient but never the intercept, so the
    optimum exists and is unique even under quasi-separation. Non-convergence
    within ``max_iter`` is reported via ``converged=False``, not an error.

    ``init`` optionally warm-starts the solver (intercept first); the
    optimum is unique, so this affects iteration count only. Bootstrap
    replicates pass the full-sample coefficients here.
    """
    y = np.asarray(labels, dtype=np.float64)
    if not ((y == 0).any() and (y == 1).any()):
        raise FitError("fit requires at least one row per class")
    raw, standardize = _design_raw(table, feature_set)
    n, p = raw.shape

    means = np.zeros(p)
    sds = np.ones(p)
    for j in range(p):
        if standardize[j]:
            mu = float(raw[:, j].mean())
            sd = float(raw[:, j].std(ddof=0))
            means[j] = mu
            sds[j] = sd if sd > 0.0 else 1.0
    X = (raw - means) / sds

    design = np.column_stack([np.ones(n), X])
    penalty = np.concatenate([[0.0], np.full(p, config.l2)])

    if init is not None:
        if len(init) != p + 1:
            raise FitError(f"init must have {p + 1} coefficients")
        beta = np.asarray(init, dtype=np.float64).copy()
    else:
        beta = np.zeros(p + 1)

    def pll(eta_v: np.ndarray, b: np.ndarray) -> float:
        return float(y @ eta_v - np.sum(np.logaddexp(0.0, eta_v))
                     - 0.5 * np.sum(penalty * b * b))

    eta = design @ beta
    ll = pll(eta, beta)
    converged = False
    it = 0
    for it in range(1, config.max_iter + 1):
        prob = np.clip(sigmoid(eta), SCORE_EPS, 1.0 - SCORE_EPS)
        grad = design.T @ (y - prob) - penalty * beta
        if float(np.max(np.abs(grad))) < config.tol:
            converged = True
            break
        w = prob * (1.0 - prob)
        hess = (design * w[:, None]).T @ design
        hess[np.diag_indices_from(hess)] += penalty
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        # step-halving keeps the penalized objective non-decreasing
        scale = 1.0
        step_max = float(np.max(np.abs(step)))
        beta_max = float(np.max(np.abs(beta)))
        improved = False
        for _ in range(40):
            cand = beta + scale * step
            cand_eta = design @ cand
            cand_ll = pll(cand_eta, cand)
            if cand_ll >= ll:
                improved = True
                break
            if scale * step_max < 1e-11 * (1.0 + beta_max):
                break  # shrunk below float significance of the objective
            scale *= 0.5
        if not improved:
            # no improving step exists at float resolution
            grad_now = loglik_gradient(design, y, beta, penalty)
            converged = bool(np.max(np.abs(grad_now)) < math.sqrt(config.tol))
            break
        beta = cand
        eta = cand_eta
        ll = cand_ll
    else:
        it = config.max_iter

    unpenalized = float(np.sum(y * eta - np.logaddexp(0.0, eta)))
    return PropensityModel(
        feature_set=feature_set,
        feature_names=feature_set.feature_names,
        intercept=float(beta[0]),
        coefs=beta[1:].copy(),
        means=means,
        sds=sds,
        converged=converged,
        n_iter=it,
        log_likelihood=unpenalized,
    )


def predict(model: PropensityModel, table: FeatureTable) -> np.ndarray:
    """Propensity scores in (0, 1) for rows of ``table``; scores are clamped
    to [1e-12, 1 - 1e-12] so downstream logits stay finite."""
    raw, _ = _design_raw(table, model.feature_set)
    X = (raw - model.means) / model.sds
    eta = model.intercept + X @ model.coefs
    return np.clip(sigmoid(eta), SCORE_EPS, 1.0 - SCORE_EPS)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelScore:
    """Held-out (or train) discrimination summary at threshold 0.5."""

    split: str
    auc: float
    f1: float
    tp: int
    fp: int
    tn: int
    fn: int
    pr_curve: tuple[tuple[float, float], ...]  # (recall, precision)

    def to_dict(self) -> dict:
        return {
            "split": self.split,
            "auc": self.auc,
            "f1": self.f1,
            "confusion": {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn},
            "pr_curve": [[r, p] for r, p in self.pr_curve],
        }


def auc_score(scores: np.ndarray, labels: np.ndarray) -> float:
    """Mann-Whitney AUC with ties counted one half, via midranks.

    Equals the O(n^2) pairwise count exactly: midranks are multiples of 0.5,
    so the rank sum is float-exact at any realistic n.
    """
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    n1 = int((y == 1).sum())
    n0 = int((y == 0).sum())
    if n1 == 0 or n0 == 0:
        raise EvaluationError("AUC undefined for single-class labels")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores), dtype=np.float64)
    s = scores[order]
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and s[j + 1] == s[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0  # average rank, 1-based
        i = j + 1
    rank_sum_pos = float(ranks[y == 1].sum())
    return (rank_sum_pos - n1 * (n1 + 1) / 2.0) / (n1 * n0)


def evaluate(scores: np.ndarray, labels: np.ndarray, split: str = "test") -> ModelScore:
    """AUC, F1 and confusion counts at threshold 0.5 (score >= 0.5 predicts
    treated), and the precision-recall curve at every distinct threshold."""
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise EvaluationError("evaluation requires both classes present")

    auc = auc_score(scores, y)

    pred = scores >= 0.5
    tp = int(np.sum(pred & (y == 1)))
    fp = int(np.sum(pred & (y == 0)))
    fn = int(np.sum(~pred & (y == 1)))
    tn = int(np.sum(~pred & (y == 0)))
    f1 = 2.0 * tp / (2.0 * tp + fp + fn) if (2 * tp + fp + fn) > 0 else 0.0

    pr = []
    for thr in np.unique(scores)[::-1]:
        sel = scores >= thr
        tp_t = int(np.sum(sel & (y == 1)))
        fp_t = int(np.sum(sel & (y == 0)))
        pr.append((tp_t / n_pos, tp_t / (tp_t + fp_t)))
    return ModelScore(split=split, auc=float(auc), f1=float(f1),
                      tp=tp, fp=fp, tn=tn, fn=fn, pr_curve=tuple(pr))


# ---------------------------------------------------------------------------
# train/test split
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SplitIndex:
    """Treatment-stratified train/test partition of unit ids."""

    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    seed: int


def split(unit_ids: Sequence[str], treatment: np.ndarray, train_fraction: float,
          seed: int) -> SplitIndex:
    """Split each treatment arm independently at ``train_fraction``.

    Deterministic for a fixed seed; both sides keep at least one unit of
    each arm. Ids retain dataset row order within each side.
    """
    if not 0.0 < train_fraction < 1.0:
        raise FitError("train_fraction must be in (0, 1)")
    d = np.asarray(treatment)
    train_rows: list[int] = []
    test_rows: list[int] = []
    for arm in (0, 1):
        rows = np.flatnonzero(d == arm)
        if rows.size < 2:
            raise FitError(f"treatment arm {arm} has {rows.size} unit(s); "
                           "need >= 2 per arm to stratify")
        rng = np.random.default_rng([seed, STREAM_SPLIT, arm])
        perm = rng.permutation(rows)
        n_train = int(round(train_fraction * rows.size))
        n_train = min(max(n_train, 1), rows.size - 1)
        train_rows.extend(perm[:n_train].tolist())
        test_rows.extend(perm[n_train:].tolist())
    train_rows.sort()
    test_rows.sort()
    ids = list(unit_ids)
    return SplitIndex(
        train_ids=tuple(ids[i] for i in train_rows),
        test_ids=tuple(ids[i] for i in test_rows),
        seed=seed,
    )


# ---------------------------------------------------------------------------
# exhaustive model selection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SelectionConfig:
    top_k: int = 5
    max_base_subset_size: int | None = None
    subset_budget: int = 4096
    interaction_budget: int = 512
    fit: FitConfig = field(default_factory=FitConfig)


@dataclass(frozen=True)
class CandidateRecord:
    """One enumerated candidate with its held-out scores."""

    base_features: tuple[str, ...]
    interactions: tuple[tuple[str, str], ...]
    auc: float
    f1: float
    converged: bool
    stage: int

    @property
    def sort_key(self):
        names = self.base_features + tuple(f"{a}*{b}" for a, b in self.interactions)
        return (-self.auc, -self.f1, len(names), names)

    def to_dict(self) -> dict:
        return {
            "base_features": list(self.base_features),
            "interactions": [list(p) for p in self.interactions],
            "auc": self.auc,
            "f1": self.f1,
            "converged": self.converged,
            "stage": self.stage,
        }


@dataclass(frozen=True)
class SelectionResult:
    stage1: tuple[CandidateRecord, ...]  # ranked best-first
    stage2: tuple[CandidateRecord, ...]  # ranked best-first
    best_record: CandidateRecord
    best_model: PropensityModel          # fitted on the train rows


def _interaction_variants(pairs: list[tuple[str, str]], budget: int):
    """Subsets of candidate pairs in (size, lexicographic) order, truncated
    at ``budget`` variants. The empty set (no added interactions) is first."""
    count = 0
    for r in range(len(pairs) + 1):
        for combo in itertools.combinations(pairs, r):
            if count >= budget:
                return
            count += 1
            yield combo


def select_model(table: FeatureTable, labels: np.ndarray, split_index: SplitIndex,
                 unit_ids: Sequence[str], base_features: Sequence[str] | None = None,
                 config: SelectionConfig = SelectionConfig(),
                 threads: int = 1,
                 progress: Callable[[float], None] | None = None) -> SelectionResult:
    """Two-stage exhaustive search over feature subsets and interactions.

    Stage 1 fits every non-empty subset of the base features on the train
    rows and ranks them by test AUC (ties: higher F1, then fewer features,
    then lexicographic name order). Stage 2 re-enumerates the ``top_k``
    finalists with added pairwise interaction sets. The overall winner is
    the best stage-2 candidate under the same ordering.

    Candidate fits are independent; with ``threads > 1`` they run in a
    thread pool and are merged in enumeration order, so parallelism never
    changes the result.
    """
    if base_features is None:
        base_features = list(table.names)
    base_features = list(base_features)
    for name in base_features:
        if name not in table.columns:
            raise FitError(f"unknown base feature '{name}'")
    if not base_features:
        raise FitError("no base features to select over")

    max_size = len(base_features) if config.max_base_subset_size is None \
        else min(config.max_base_subset_size, len(base_features))
    n_subsets = sum(math.comb(len(base_features), s) for s in range(1, max_size + 1))
    if n_subsets > config.subset_budget:
        raise SelectionBudgetError(
            f"{n_subsets} stage-1 subsets exceed the budget of {config.subset_budget}; "
            "reduce the base feature list or set max_base_subset_size")

    id_to_row = {uid: i for i, uid in enumerate(unit_ids)}
    train_idx = np.array([id_to_row[u] for u in split_index.train_ids], dtype=np.int64)
    test_idx = np.array([id_to_row[u] for u in split_index.test_ids], dtype=np.int64)
    y = np.asarray(labels, dtype=np.float64)
    train_table = table.subset(train_idx)
    test_table = table.subset(test_idx)
    y_train, y_test = y[train_idx], y[test_idx]

    def fit_and_score(fs: FeatureSet, stage: int) -> tuple[CandidateRecord, PropensityModel]:
        model = fit(train_table, y_train, fs, config.fit)
        scores = predict(model, test_table)
        ev = evaluate(scores, y_test, split="test")
        rec = CandidateRecord(
            base_features=fs.base_features, interactions=fs.interactions,
            auc=ev.auc, f1=ev.f1, converged=model.converged, stage=stage,
        )
        return rec, model

    stage1_sets = [
        FeatureSet(base_features=combo)
        for size in range(1, max_size + 1)
        for combo in itertools.combinations(base_features, size)
    ]

    def run_all(sets: list[FeatureSet], stage: int, frac_base: float):
        # stage 1 fills [0, 0.5] of the selection progress, stage 2 the rest
        done = 0
        results = []
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                for out in pool.map(lambda fs: fit_and_score(fs, stage), sets):
                    results.append(out)
                    done += 1
                    if progress:
                        progress(frac_base + 0.5 * done / len(sets))
        else:
            for fs in sets:
                results.append(fit_and_score(fs, stage))
                done += 1
                if progress:
                    progress(frac_base + 0.5 * done / len(sets))
        return results

    stage1_out = run_all(stage1_sets, stage=1, frac_base=0.0)
    stage1_ranked = sorted((rec for rec, _ in stage1_out), key=lambda r: r.sort_key)

    finalists = stage1_ranked[:config.top_k]
    stage2_sets: list[FeatureSet] = []
    for rec in finalists:
        pairs = list(itertools.combinations(rec.base_features, 2))
        for combo in _interaction_variants(pairs, config.interaction_budget):
            stage2_sets.append(FeatureSet(base_features=rec.base_features,
                                          interactions=combo))

    stage2_out = run_all(stage2_sets, stage=2, frac_base=0.5)
    order = sorted(range(len(stage2_out)), key=lambda i: stage2_out[i][0].sort_key)
    stage2_ranked = tuple(stage2_out[i][0] for i in order)
    best_record, best_model = stage2_out[order[0]]

    return SelectionResult(
        stage1=tuple(stage1_ranked),
        stage2=stage2_ranked,
        best_record=best_record,
        best_model=best_model,
    )
