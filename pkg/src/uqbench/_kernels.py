"""Hot numeric kernels, with numba-compiled and pure-numpy implementations.

Every kernel exists twice: a loop version compiled with ``numba.njit`` and a
vectorized numpy fallback. The active backend is chosen at import time from
the ``UQBENCH_BACKEND`` environment variable: ``auto`` (default, numba when
importable), ``numba`` (required, raise if missing) or ``numpy``. Both
implementations of each kernel agree to floating-point roundoff and are
cross-checked in the test suite; ``benchmarks/bench_kernels.py`` compares
their speed.
"""

import os

import numpy as np

__all__ = [
    "BACKEND",
    "suffix_stat_curve",
    "tie_average_ranks",
    "nearest_valid_fill",
]


# ---------------------------------------------------------------------------
# pure-numpy implementations


def suffix_stat_curve_numpy(ordered_errors, counts, use_sqrt):
    """Remaining-set statistic after removing the first `counts[j]` entries.

    `ordered_errors` is sorted in removal order (removed-first). Entry j of
    the result is the mean (or sqrt of the mean when `use_sqrt`) of
    `ordered_errors[counts[j]:]`. Requires counts[j] < len(ordered_errors).
    """
    suffix = np.cumsum(ordered_errors[::-1])[::-1]
    remaining = ordered_errors.size - counts
    stat = suffix[counts] / remaining
    if use_sqrt:
        stat = np.sqrt(stat)
    return stat


def tie_average_ranks_numpy(values):
    """1-based ranks with ties assigned the average rank of their group."""
    n = values.size
    order = np.argsort(values, kind="stable")
    sv = values[order]
    boundary = np.empty(n, dtype=bool)
    boundary[0] = True
    boundary[1:] = sv[1:] != sv[:-1]
    start = np.flatnonzero(boundary)
    end = np.append(start[1:], n)
    avg = 0.5 * (start + end - 1) + 1.0
    ranks = np.empty(n, dtype=np.float64)
    ranks[order] = np.repeat(avg, end - start)
    return ranks


def nearest_valid_fill_numpy(values, valid, chunk=2048):
    """Fill invalid pixels with the nearest valid pixel's channel values.

    Distance is Euclidean in pixel coordinates; ties pick the valid pixel
    that comes first in row-major order. `values` is (H, W, C), `valid` is
    (H, W) bool with at least one True entry.
    """
    out = values.copy()
    vy, vx = np.nonzero(valid)
    iy, ix = np.nonzero(~valid)
    # chunk the invalid axis so the distance matrix stays bounded
    for s in range(0, iy.size, chunk):
        cy = iy[s : s + chunk]
        cx = ix[s : s + chunk]
        d2 = (cy[:, None] - vy[None, :]) ** 2 + (cx[:, None] - vx[None, :]) ** 2
        j = np.argmin(d2, axis=1)  # first minimum = earliest row-major valid pixel
        out[cy, cx] = values[vy[j], vx[j]]
    return out


# ---------------------------------------------------------------------------
# loop bodies compiled by numba


def _suffix_stat_curve_loop(ordered_errors, counts, use_sqrt):
    n = ordered_errors.size
    suffix = np.empty(n + 1, dtype=np.float64)
    suffix[n] = 0.0
    for i in range(n - 1, -1, -1):
        suffix[i] = suffix[i + 1] + ordered_errors[i]
    out = np.empty(counts.size, dtype=np.float64)
    for j in range(counts.size):
        c = counts[j]
        v = suffix[c] / (n - c)
        out[j] = np.sqrt(v) if use_sqrt else v
    return out


def _tie_average_ranks_loop(values):
    n = values.size
    order = np.argsort(values)
    ranks = np.empty(n, dtype=np.float64)
    i = 0
    while i < n:
        j = i
        v = values[order[i]]
        while j + 1 < n and values[order[j + 1]] == v:
            j += 1
        avg = 0.5 * (i + j) + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def _nearest_valid_fill_loop(values, valid):
    h, w, c = values.shape
    out = values.copy()
    n_valid = 0
    for y in range(h):
        for x in range(w):
            if valid[y, x]:
                n_valid += 1
    vy = np.empty(n_valid, dtype=np.int64)
    vx = np.empty(n_valid, dtype=np.int64)
    k = 0
    for y in range(h):
        for x in range(w):
            if valid[y, x]:
                vy[k] = y
                vx[k] = x
                k += 1
    for y in range(h):
        for x in range(w):
            if valid[y, x]:
                continue
            best = np.int64(1) << 62
            best_j = 0
            for j in range(n_valid):
                dy = y - vy[j]
                dx = x - vx[j]
                d = dy * dy + dx * dx
                if d < best:  # strict: first row-major valid pixel wins ties
                    best = d
                    best_j = j
            for ch in range(c):
                out[y, x, ch] = values[vy[best_j], vx[best_j], ch]
    return out


# ---------------------------------------------------------------------------
# backend selection

_env = os.environ.get("UQBENCH_BACKEND", "auto").strip().lower()
if _env not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"UQBENCH_BACKEND must be 'auto', 'numba' or 'numpy', got {_env!r}"
    )

suffix_stat_curve_numba = None
tie_average_ranks_numba = None
nearest_valid_fill_numba = None

_have_numba = False
if _env in ("auto", "numba"):
    try:
        from numba import njit
    except ImportError:
        if _env == "numba":
            raise
    else:
        suffix_stat_curve_numba = njit(cache=True)(_suffix_stat_curve_loop)
        tie_average_ranks_numba = njit(cache=True)(_tie_average_ranks_loop)
        nearest_valid_fill_numba = njit(cache=True)(_nearest_valid_fill_loop)
        _have_numba = True

BACKEND = "numba" if _have_numba else "numpy"

if _have_numba:
    suffix_stat_curve = suffix_stat_curve_numba
    tie_average_ranks = tie_average_ranks_numba
    nearest_valid_fill = nearest_valid_fill_numba
else:
    suffix_stat_curve = suffix_stat_curve_numpy
    tie_average_ranks = tie_average_ranks_numpy
    nearest_valid_fill = nearest_valid_fill_numpy
