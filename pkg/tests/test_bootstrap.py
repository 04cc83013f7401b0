"""Quantile rule, interval algebra, and the replicate driver."""

import numpy as np
import pytest

from psm_workbench.bootstrap import (intervals, quantile, run_bootstrap,
                                     stratified_resample)
from psm_workbench.errors import BootstrapUnstableError, MatchingError


class TestQuantile:
    def test_median_of_three(self):
        assert quantile([1, 2, 3], 0.5) == 2.0

    def test_interpolated(self):
        # h = (2-1) * 0.25 = 0.25 -> 10 + 0.25 * (20 - 10)
        assert quantile([10, 20], 0.25) == 12.5

    def test_q_zero_is_minimum(self):
        assert quantile([4, 7, 9], 0.0) == 4.0

    def test_q_one_is_maximum(self):
        assert quantile([4, 7, 9], 1.0) == 9.0

    def test_matches_numpy_type7(self, rng):
        for trial in range(50):
            values = np.sort(rng.standard_normal(int(rng.integers(1, 40))))
            q = float(rng.uniform(0, 1))
            assert quantile(values, q) == pytest.approx(
                float(np.quantile(values, q)), rel=1e-12, abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            quantile([], 0.5)


class TestIntervals:
    def test_injected_1_to_100(self):
        """Percentile CI of {1..100} at alpha=0.9 equals the sort-based
        type-7 ranks computed independently."""
        estimates = np.arange(1.0, 101.0)
        alpha = 0.9

        def oracle(q):
            s = np.sort(estimates)
            h = (len(s) - 1) * q
            lo = int(np.floor(h))
            hi = int(np.ceil(h))
            return s[lo] + (h - lo) * (s[hi] - s[lo])

        ci_pct, _, _ = intervals(estimates, att_point=50.0, alpha=alpha)
        assert ci_pct == (oracle((1 - alpha) / 2), oracle((1 + alpha) / 2))
        assert ci_pct == pytest.approx((5.95, 95.05))

    def test_symmetric_centered_and_contains_percentile(self, rng):
        for trial in range(50):
            est = rng.standard_normal(int(rng.integers(5, 200))) * rng.uniform(0.1, 5)
            point = float(rng.standard_normal())
            (p_lo, p_hi), (b_lo, b_hi), (s_lo, s_hi) = intervals(est, point, 0.9)
            assert p_lo <= p_hi and b_lo <= b_hi and s_lo <= s_hi
            assert s_lo + s_hi == pytest.approx(2 * point)  # centered
            assert s_lo <= p_lo + 1e-12 and s_hi >= p_hi - 1e-12

    def test_percentile_brackets_median(self, rng):
        est = rng.standard_normal(100)
        (lo, hi), _, _ = intervals(est, 0.0, 0.9)
        med = quantile(np.sort(est), 0.5)
        assert lo <= med <= hi

    def test_basic_mirrors_percentile(self):
        est = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        point = 3.0
        (p_lo, p_hi), (b_lo, b_hi), _ = intervals(est, point, 0.8)
        assert b_lo == pytest.approx(2 * point - p_hi)
        assert b_hi == pytest.approx(2 * point - p_lo)


class TestRunBootstrap:
    def test_deterministic_across_threads(self):
        def replicate(b, rng):
            return float(rng.standard_normal())

        r1 = run_bootstrap(replicate, att_point=0.0, seed=42, n_samples=64, threads=1)
        r2 = run_bootstrap(replicate, att_point=0.0, seed=42, n_samples=64, threads=8)
        assert r1.estimates == r2.estimates
        assert r1.ci_percentile == r2.ci_percentile

    def test_fixed_seed_bit_identical(self):
        def replicate(b, rng):
            return float(rng.standard_normal())

        r1 = run_bootstrap(replicate, att_point=0.0, seed=7, n_samples=32)
        r2 = run_bootstrap(replicate, att_point=0.0, seed=7, n_samples=32)
        assert r1.estimates == r2.estimates

    def test_constant_estimates_degenerate_cis(self):
        result = run_bootstrap(lambda b, rng: 0.0, att_point=0.0, seed=1, n_samples=20)
        assert set(result.estimates) == {0.0}
        assert result.ci_percentile == (0.0, 0.0)
        assert result.ci_basic == (0.0, 0.0)
        assert result.ci_symmetric == (0.0, 0.0)

    def test_failures_recorded_and_excluded(self):
        def replicate(b, rng):
            if b % 10 == 0:  # 10% failures
                raise MatchingError("no common support")
            return float(b)

        result = run_bootstrap(replicate, att_point=0.0, seed=1, n_samples=50)
        assert len(result.failures) == 5
        assert len(result.estimates) == 45
        assert all("no common support" in msg for _, msg in result.failures)

    def test_too_many_failures_unstable(self):
        def replicate(b, rng):
            if b % 3 == 0:  # ~33% failures
                raise MatchingError("degenerate resample")
            return float(b)

        with pytest.raises(BootstrapUnstableError, match="unstable"):
            run_bootstrap(replicate, att_point=0.0, seed=1, n_samples=30)

    def test_defaults(self):
        from psm_workbench.bootstrap import DEFAULT_ALPHA, DEFAULT_N_SAMPLES
        assert DEFAULT_N_SAMPLES == 200
        assert DEFAULT_ALPHA == 0.9

    def test_progress_monotone(self):
        seen = []
        run_bootstrap(lambda b, rng: 0.0, att_point=0.0, seed=1, n_samples=25,
                      threads=4, progress=lambda done, total: seen.append(done))
        assert seen == sorted(seen)
        assert seen[-1] == 25

    def test_estimates_ordered_by_replicate_index(self):
        result = run_bootstrap(lambda b, rng: float(b), att_point=0.0, seed=1,
                               n_samples=16, threads=4)
        assert result.estimates == tuple(float(b) for b in range(16))


class TestStratifiedResample:
    def test_arm_sizes_preserved(self, rng):
        treated = np.arange(0, 30)
        control = np.arange(30, 100)
        idx = stratified_resample(rng, treated, control)
        assert len(idx) == 100
        assert np.isin(idx[:30], treated).all()
        assert np.isin(idx[30:], control).all()

    def test_deterministic_for_fixed_stream(self):
        a = stratified_resample(np.random.default_rng([5, 2, 0]),
                                np.arange(10), np.arange(10, 25))
        b = stratified_resample(np.random.default_rng([5, 2, 0]),
                                np.arange(10), np.arange(10, 25))
        np.testing.assert_array_equal(a, b)
