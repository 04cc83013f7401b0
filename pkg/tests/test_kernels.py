"""Backend equivalence: the numba kernel must reproduce the numpy
reference bit-for-bit, including heavy score ties."""

import numpy as np
import pytest

from psm_workbench.kernels import matching_numpy

try:
    from psm_workbench.kernels import matching_numba
    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

pytestmark = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")


def _random_instance(rng, tie_heavy=False):
    n_t = int(rng.integers(1, 40))
    n_c = int(rng.integers(1, 60))
    if tie_heavy:
        # few distinct score values force many exact gap ties
        levels = rng.uniform(0.1, 0.9, 4)
        ts = levels[rng.integers(0, 4, n_t)]
        cs = levels[rng.integers(0, 4, n_c)]
    else:
        ts = rng.uniform(0.01, 0.99, n_t)
        cs = rng.uniform(0.01, 0.99, n_c)
    order = np.lexsort((np.arange(n_c), cs))
    cs_sorted = cs[order]
    ranks = rng.permutation(n_c).astype(np.int64)  # arbitrary id ranks
    return ts, cs_sorted, ranks


@pytest.mark.parametrize("tie_heavy", [False, True])
@pytest.mark.parametrize("with_replacement", [True, False])
def test_backends_identical(tie_heavy, with_replacement):
    rng = np.random.default_rng(hash((tie_heavy, with_replacement)) % 2**32)
    for trial in range(40):
        ts, cs_sorted, ranks = _random_instance(rng, tie_heavy)
        k = int(rng.integers(1, 5))
        caliper = float(rng.uniform(0.05, 1.0)) if rng.random() < 0.7 else np.inf
        a_idx, a_gap = matching_numpy.knn_match(ts, cs_sorted, ranks, k, caliper,
                                                with_replacement)
        b_idx, b_gap = matching_numba.knn_match(ts, cs_sorted, ranks, k, caliper,
                                                with_replacement)
        np.testing.assert_array_equal(a_idx, b_idx)
        np.testing.assert_array_equal(a_gap, b_gap)


def test_constant_scores_all_tied():
    # every control is equidistant: selection must follow id ranks exactly
    ts = np.full(3, 0.5)
    cs = np.full(10, 0.5)
    ranks = np.array([5, 2, 8, 0, 9, 1, 3, 7, 4, 6], dtype=np.int64)
    for wr in (True, False):
        a = matching_numpy.knn_match(ts, cs, ranks, 2, np.inf, wr)
        b = matching_numba.knn_match(ts, cs, ranks, 2, np.inf, wr)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])
    # with replacement every treated takes the two lowest id ranks
    idx, _ = matching_numpy.knn_match(ts, cs, ranks, 2, np.inf, True)
    assert all(set(ranks[row]) == {0, 1} for row in idx)
