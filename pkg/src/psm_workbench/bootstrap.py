"""Bootstrap distribution of the ATT with full per-replicate refits.

Each replicate resamples units with replacement within each treatment arm
(arm sizes preserved), re-estimates the selected model's coefficients,
re-matches, and re-computes the ATT. Replicate randomness is keyed by
(seed, stream, replicate index), so a fixed seed gives a bit-identical
estimates list at any parallelism level.
"""

from __future__ import annotations

import math
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import BootstrapUnstableError, CancelledRun, WorkbenchError
from .propensity import STREAM_BOOTSTRAP

DEFAULT_N_SAMPLES = 200
DEFAULT_ALPHA = 0.9


def quantile(sorted_values, q: float) -> float:
    """Linear interpolation between closest ranks (type-7: h = (n-1)q).

    ``sorted_values`` must already be in ascending order.
    """
    n = len(sorted_values)
    if n == 0:
        raise ValueError("quantile of empty sequence")
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must be in [0, 1]")
    h = (n - 1) * q
    lo = math.floor(h)
    hi = math.ceil(h)
    if lo == hi:
        return float(sorted_values[lo])
    a = float(sorted_values[lo])
    b = float(sorted_values[hi])
    return a + (h - lo) * (b - a)


def stratified_resample(rng: np.random.Generator, treated_rows: np.ndarray,
                        control_rows: np.ndarray) -> np.ndarray:
    """Draw len(treated) treated rows and len(control) control rows with
    replacement; arm sizes are preserved exactly."""
    t = treated_rows[rng.integers(0, treated_rows.size, treated_rows.size)]
    c = control_rows[rng.integers(0, control_rows.size, control_rows.size)]
    return np.concatenate([t, c])


@dataclass(frozen=True)
class BootstrapResult:
    """Replicate estimates plus three interval readings of the same
    distribution.

    * percentile: raw (1-alpha)/2 and (1+alpha)/2 quantiles (headline CI);
    * basic: point estimate minus the mirrored centered deviations;
    * symmetric: point estimate +/- the larger one-sided percentile excess.
    """

    estimates: tuple[float, ...]
    att_point: float
    ci_percentile: tuple[float, float]
    ci_basic: tuple[float, float]
    ci_symmetric: tuple[float, float]
    alpha: float
    n_samples: int
    seed: int
    failures: tuple[tuple[int, str], ...]

    def to_dict(self) -> dict:
        return {
            "estimates": list(self.estimates),
            "att_point": self.att_point,
            "ci_percentile": list(self.ci_percentile),
            "ci_basic": list(self.ci_basic),
            "ci_symmetric": list(self.ci_symmetric),
            "alpha": self.alpha,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "failures": [[i, m] for i, m in self.failures],
        }


def intervals(estimates: np.ndarray, att_point: float, alpha: float):
    s = np.sort(np.asarray(estimates, dtype=np.float64))
    q_lo = quantile(s, (1.0 - alpha) / 2.0)
    q_hi = quantile(s, (1.0 + alpha) / 2.0)
    half = max(att_point - q_lo, q_hi - att_point)
    return (
        (q_lo, q_hi),
        (2.0 * att_point - q_hi, 2.0 * att_point - q_lo),
        (att_point - half, att_point + half),
    )


def run_bootstrap(replicate_fn: Callable[[int, np.random.Generator], float],
                  att_point: float, seed: int,
                  n_samples: int = DEFAULT_N_SAMPLES, alpha: float = DEFAULT_ALPHA,
                  threads: int = 1,
                  progress: Callable[[int, int], None] | None = None,
                  should_cancel: Callable[[], bool] | None = None,
                  max_failure_fraction: float = 0.2) -> BootstrapResult:
    """Run ``n_samples`` replicates of ``replicate_fn`` and derive intervals.

    ``replicate_fn(index, rng)`` returns one ATT estimate; a
    :class:`WorkbenchError` inside it marks the replicate failed (recorded,
    excluded). More than ``max_failure_fraction`` failures aborts with
    ``bootstrap unstable``. Results are merged by replicate index, so the
    estimates list is identical for any ``threads``.
    """
    if n_samples < 2:
        raise BootstrapUnstableError("bootstrap needs n_samples >= 2")
    if not 0.0 < alpha < 1.0:
        raise BootstrapUnstableError("alpha must be in (0, 1)")

    results: list[float | None] = [None] * n_samples
    failures: list[tuple[int, str]] = []

    def one(b: int) -> tuple[int, float | None, str | None]:
        if should_cancel and should_cancel():
            raise CancelledRun("cancelled during bootstrapping")
        rng = np.random.default_rng([seed, STREAM_BOOTSTRAP, b])
        try:
            return b, float(replicate_fn(b, rng)), None
        except CancelledRun:
            raise
        except WorkbenchError as e:
            return b, None, str(e)

    done = 0
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            pending = {pool.submit(one, b) for b in range(n_samples)}
            while pending:
                finished, pending = wait(pending, return_when=FIRST_COMPLETED)
                for fut in finished:
                    b, value, err = fut.result()
                    if err is None:
                        results[b] = value
                    else:
                        failures.append((b, err))
                    done += 1
                    if progress:
                        progress(done, n_samples)
    else:
        for b in range(n_samples):
            b, value, err = one(b)
            if err is None:
                results[b] = value
            else:
                failures.append((b, err))
            done += 1
            if progress:
                progress(done, n_samples)

    failures.sort(key=lambda x: x[0])
    estimates = np.array([v for v in results if v is not None], dtype=np.float64)
    if len(failures) > max_failure_fraction * n_samples:
        raise BootstrapUnstableError(
            f"bootstrap unstable: {len(failures)}/{n_samples} replicates failed "
            f"(first: {failures[0][1]})")

    ci_pct, ci_basic, ci_sym = intervals(estimates, att_point, alpha)
    return BootstrapResult(
        estimates=tuple(float(v) for v in estimates),
        att_point=float(att_point),
        ci_percentile=ci_pct,
        ci_basic=ci_basic,
        ci_symmetric=ci_sym,
        alpha=float(alpha),
        n_samples=int(n_samples),
        seed=int(seed),
        failures=tuple(failures),
    )
