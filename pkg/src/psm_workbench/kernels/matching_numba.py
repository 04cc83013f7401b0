"""Numba-compiled k-nearest-control search.

Semantics are defined by matching_numpy.knn_match; this version replaces
the per-treated full scan with a two-pointer frontier walk over the sorted
control scores: O(k + ties + log n) per treated unit instead of
O(n log n). Gap ties are gathered exhaustively and resolved by id rank
with a two-pass stable sort, so results are bit-identical to the numpy
backend.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _knn_match_impl(t_scores, c_scores, c_idrank, k, caliper, with_replacement):
    n_t = t_scores.shape[0]
    n_c = c_scores.shape[0]
    out_idx = np.full((n_t, k), -1, dtype=np.int64)
    out_gap = np.zeros((n_t, k), dtype=np.float64)
    consumed = np.zeros(n_c, dtype=np.bool_)

    buf_pos = np.empty(n_c, dtype=np.int64)
    buf_gap = np.empty(n_c, dtype=np.float64)

    for ti in range(n_t):
        s = t_scores[ti]
        right = np.searchsorted(c_scores, s)
        left = right - 1
        m = 0
        kth_gap = np.inf
        # collect every control whose gap is at most the k-th smallest
        # (plus all ties at exactly that gap), in non-decreasing gap order
        while True:
            while left >= 0 and consumed[left]:
                left -= 1
            while right < n_c and consumed[right]:
                right += 1
            gap_l = s - c_scores[left] if left >= 0 else np.inf
            gap_r = c_scores[right] - s if right < n_c else np.inf
            if gap_l <= gap_r:
                g = gap_l
                pos = left
            else:
                g = gap_r
                pos = right
            if g == np.inf or g > caliper:  # exhausted frontiers or out of caliper
                break
            if m < k:
                buf_pos[m] = pos
                buf_gap[m] = g
                m += 1
                if m == k:
                    kth_gap = g
            elif g == kth_gap:
                buf_pos[m] = pos
                buf_gap[m] = g
                m += 1
            else:
                break
            if pos == left:
                left -= 1
            else:
                right += 1
        if m == 0:
            continue

        # order candidates by (gap, id rank): stable sort by the secondary
        # key first, then by gap
        ranks = np.empty(m, dtype=np.int64)
        gaps = np.empty(m, dtype=np.float64)
        for i in range(m):
            ranks[i] = c_idrank[buf_pos[i]]
            gaps[i] = buf_gap[i]
        ord1 = np.argsort(ranks, kind="mergesort")
        gaps_by_rank = np.empty(m, dtype=np.float64)
        for i in range(m):
            gaps_by_rank[i] = gaps[ord1[i]]
        ord2 = np.argsort(gaps_by_rank, kind="mergesort")

        take = k if m > k else m
        for t in range(take):
            sel = ord1[ord2[t]]
            pos = buf_pos[sel]
            out_idx[ti, t] = pos
            out_gap[ti, t] = buf_gap[sel]
            if not with_replacement:
                consumed[pos] = True
    return out_idx, out_gap


def knn_match(t_scores, c_scores_sorted, c_idrank_sorted, k, caliper,
              with_replacement):
    return _knn_match_impl(
        np.ascontiguousarray(t_scores, dtype=np.float64),
        np.ascontiguousarray(c_scores_sorted, dtype=np.float64),
        np.ascontiguousarray(c_idrank_sorted, dtype=np.int64),
        k, caliper, with_replacement,
    )
