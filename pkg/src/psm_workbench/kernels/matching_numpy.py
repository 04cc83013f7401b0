"""Pure numpy k-nearest-control search (reference backend).

Contract shared with the numba backend:

- ``t_scores``: treated scores in processing order (the caller pre-sorts
  by descending score, ties by unit-id rank).
- ``c_scores_sorted`` / ``c_idrank_sorted``: control scores ascending with
  ties by id rank, and the id rank of each sorted control.
- For each treated unit, select up to ``k`` controls minimizing the
  absolute score gap, subject to ``gap <= caliper``; equal gaps resolve
  by lower id rank. Without replacement a selected control is consumed
  for all later treated units.

Returns ``(out_idx, out_gap)`` of shape (n_treated, k); ``out_idx`` holds
positions into the sorted control arrays, -1 padding where fewer than k
matches exist.
"""

from __future__ import annotations

import numpy as np


def knn_match(t_scores: np.ndarray, c_scores_sorted: np.ndarray,
              c_idrank_sorted: np.ndarray, k: int, caliper: float,
              with_replacement: bool):
    n_t = t_scores.shape[0]
    n_c = c_scores_sorted.shape[0]
    out_idx = np.full((n_t, k), -1, dtype=np.int64)
    out_gap = np.zeros((n_t, k), dtype=np.float64)
    consumed = np.zeros(n_c, dtype=bool)

    for ti in range(n_t):
        gap = np.abs(c_scores_sorted - t_scores[ti])
        ok = gap <= caliper
        if not with_replacement:
            ok &= ~consumed
        cand = np.flatnonzero(ok)
        if cand.size == 0:
            continue
        order = np.lexsort((c_idrank_sorted[cand], gap[cand]))
        sel = cand[order[:k]]
        out_idx[ti, :sel.size] = sel
        out_gap[ti, :sel.size] = gap[sel]
        if not with_replacement:
            consumed[sel] = True
    return out_idx, out_gap
