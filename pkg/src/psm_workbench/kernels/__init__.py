"""Hot numeric kernels with selectable backend.

The k-nearest-control search dominates runtime once bootstrap replicates
multiply the matching work by N, so it is JIT-compiled with numba. A pure
numpy implementation with identical semantics serves as fallback and as a
cross-check. Selection:

    PSMW_NUMBA=0|false|off  -> force the numpy path
    numba import failure    -> numpy path with a one-time warning
    otherwise               -> numba path

Both backends are bit-identical on every input; ``tests/test_kernels.py``
enforces that and ``benchmarks/bench_matching.py`` compares their speed.
"""

from __future__ import annotations

import os
import warnings

from . import matching_numpy

_FALSY = {"0", "false", "off", "no"}


def _select_backend():
    if os.environ.get("PSMW_NUMBA", "").strip().lower() in _FALSY:
        return matching_numpy, "numpy"
    try:
        from . import matching_numba
        return matching_numba, "numba"
    except ImportError:
        warnings.warn("numba unavailable; matching falls back to pure numpy")
        return matching_numpy, "numpy"


_impl, _name = _select_backend()


def backend_name() -> str:
    return _name


def knn_match(t_scores, c_scores_sorted, c_idrank_sorted, k, caliper,
              with_replacement):
    """Dispatch to the active backend; see matching_numpy.knn_match for the
    contract."""
    return _impl.knn_match(t_scores, c_scores_sorted, c_idrank_sorted,
                           int(k), float(caliper), bool(with_replacement))
