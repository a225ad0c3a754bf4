import numpy as np
import pytest

from uqbench.grid import (
    Field,
    PixelSeries,
    ValidityMask,
    densify_for_visualization,
    euclidean_norm,
    extract_valid,
)


def test_field_validation():
    f = Field(np.zeros((2, 3, 1)))
    assert (f.height, f.width, f.channels) == (2, 3, 1)
    assert not f.data.flags.writeable
    with pytest.raises(ValueError, match=r"non-finite value at pixel \(y=1, x=0"):
        Field(np.array([[[1.0]], [[np.nan]]]))
    with pytest.raises(ValueError):
        Field(np.zeros((0, 3, 1)))


def test_field_accepts_2d():
    f = Field(np.ones((2, 2)))
    assert f.channels == 1


def test_mask_counts():
    m = ValidityMask(np.array([[1, 0], [1, 1]]))
    assert m.count_valid == 3
    assert ValidityMask.all_valid(2, 2).count_valid == 4


def test_pixel_series_validation():
    with pytest.raises(ValueError, match="strictly increasing"):
        PixelSeries(np.array([0, 0]), np.array([1.0, 2.0]))
    s = PixelSeries.from_values([1.0, 2.0])
    assert len(s) == 2


def test_extract_identity_all_valid():
    f = Field(np.arange(4.0).reshape(2, 2, 1))
    s = extract_valid(f, ValidityMask.all_valid(2, 2))
    np.testing.assert_array_equal(s.indices, [0, 1, 2, 3])
    np.testing.assert_array_equal(s.values, [0.0, 1.0, 2.0, 3.0])


def test_extract_masked_single_pixel():
    f = Field(np.arange(4.0).reshape(2, 2, 1))
    mask = ValidityMask(np.array([[False, False], [True, False]]))
    s = extract_valid(f, mask)
    np.testing.assert_array_equal(s.indices, [2])
    np.testing.assert_array_equal(s.values, [2.0])


def test_extract_flow_norm_reducer():
    f = Field(np.array([[[3.0, 4.0], [0.0, 0.0]]]))
    s = extract_valid(f, ValidityMask.all_valid(1, 2), euclidean_norm)
    np.testing.assert_array_equal(s.values, [5.0, 0.0])


def test_extract_requires_reducer_for_multichannel():
    f = Field(np.zeros((1, 1, 2)))
    with pytest.raises(ValueError, match="reducer"):
        extract_valid(f, ValidityMask.all_valid(1, 1))


def test_extract_errors():
    f = Field(np.zeros((2, 2, 1)))
    with pytest.raises(ValueError, match="does not match"):
        extract_valid(f, ValidityMask.all_valid(3, 2))
    with pytest.raises(ValueError, match="no valid pixels"):
        extract_valid(f, ValidityMask(np.zeros((2, 2), dtype=bool)))


def test_densify_identity_when_all_valid():
    f = Field(np.arange(4.0).reshape(2, 2, 1))
    out = densify_for_visualization(f, ValidityMask.all_valid(2, 2))
    np.testing.assert_array_equal(out.data, f.data)
    assert out.visualization_only


def test_densify_single_source():
    f = Field(np.array([[[0.0], [7.0], [0.0]]]))
    mask = ValidityMask(np.array([[False, True, False]]))
    out = densify_for_visualization(f, mask)
    np.testing.assert_array_equal(out.data.ravel(), [7.0, 7.0, 7.0])


def test_densify_nearest_with_tie():
    # index-1 pixel is nearer to index 0; ties elsewhere go row-major
    f = Field(np.array([[[1.0], [0.0], [0.0], [9.0]]]))
    mask = ValidityMask(np.array([[True, False, False, True]]))
    out = densify_for_visualization(f, mask)
    np.testing.assert_array_equal(out.data.ravel(), [1.0, 1.0, 9.0, 9.0])


def test_densify_idempotent():
    rng = np.random.default_rng(3)
    f = Field(rng.random((6, 5, 1)))
    mask = ValidityMask(rng.random((6, 5)) < 0.3)
    if mask.count_valid == 0:
        mask = ValidityMask.all_valid(6, 5)
    once = densify_for_visualization(f, mask)
    twice = densify_for_visualization(once, mask)
    np.testing.assert_array_equal(once.data, twice.data)


def test_densify_empty_mask_errors():
    f = Field(np.zeros((2, 2, 1)))
    with pytest.raises(ValueError, match="no valid pixels"):
        densify_for_visualization(f, ValidityMask(np.zeros((2, 2), dtype=bool)))


def test_extract_is_bijection_under_full_mask():
    rng = np.random.default_rng(4)
    data = rng.random((7, 9, 1))
    s = extract_valid(Field(data), ValidityMask.all_valid(7, 9))
    assert len(s) == 63
    np.testing.assert_array_equal(s.values, data.ravel())
