"""Cross-check the numba kernels against their pure-numpy fallbacks."""

import numpy as np
import pytest

from uqbench import _kernels

HAVE_NUMBA = _kernels.suffix_stat_curve_numba is not None

pairs = [
    (_kernels.suffix_stat_curve_numpy, _kernels.suffix_stat_curve_numba),
    (_kernels.tie_average_ranks_numpy, _kernels.tie_average_ranks_numba),
    (_kernels.nearest_valid_fill_numpy, _kernels.nearest_valid_fill_numba),
]


@pytest.mark.skipif(not HAVE_NUMBA, reason="numba backend unavailable")
def test_suffix_curve_backends_agree():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = int(rng.integers(2, 200))
        errors = rng.random(n)
        counts = np.sort(rng.integers(0, n, size=rng.integers(1, 12))).astype(np.int64)
        for use_sqrt in (False, True):
            a = _kernels.suffix_stat_curve_numpy(errors, counts, use_sqrt)
            b = _kernels.suffix_stat_curve_numba(errors, counts, use_sqrt)
            np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-15)


@pytest.mark.skipif(not HAVE_NUMBA, reason="numba backend unavailable")
def test_tie_ranks_backends_agree():
    rng = np.random.default_rng(1)
    for _ in range(50):
        n = int(rng.integers(1, 300))
        values = rng.integers(0, 10, size=n).astype(np.float64)  # lots of ties
        a = _kernels.tie_average_ranks_numpy(values)
        b = _kernels.tie_average_ranks_numba(values)
        np.testing.assert_array_equal(a, b)


@pytest.mark.skipif(not HAVE_NUMBA, reason="numba backend unavailable")
def test_fill_backends_agree():
    rng = np.random.default_rng(2)
    for _ in range(20):
        h, w, c = int(rng.integers(1, 12)), int(rng.integers(1, 12)), int(rng.integers(1, 3))
        values = rng.random((h, w, c))
        valid = rng.random((h, w)) < 0.4
        if not valid.any():
            valid[rng.integers(0, h), rng.integers(0, w)] = True
        a = _kernels.nearest_valid_fill_numpy(values, valid)
        b = _kernels.nearest_valid_fill_numba(values, valid)
        np.testing.assert_array_equal(a, b)


def test_tie_ranks_known_values():
    ranks = _kernels.tie_average_ranks(np.array([3.0, 1.0, 3.0, 2.0]))
    np.testing.assert_array_equal(ranks, [3.5, 1.0, 3.5, 2.0])


def test_suffix_curve_simple():
    curve = _kernels.suffix_stat_curve(
        np.array([4.0, 3.0, 2.0, 1.0]), np.array([0, 1, 2, 3], dtype=np.int64), False
    )
    np.testing.assert_allclose(curve, [2.5, 2.0, 1.5, 1.0])


def test_fill_tie_breaks_row_major():
    # pixel (0,1) is equidistant from (0,0) and (0,2): earliest row-major wins
    values = np.array([[[1.0], [0.0], [9.0]]])
    valid = np.array([[True, False, True]])
    out = _kernels.nearest_valid_fill(values, valid)
    assert out[0, 1, 0] == 1.0
