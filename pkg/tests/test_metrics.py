import numpy as np
import pytest

from uqbench.grid import Field, ValidityMask
from uqbench.metrics import (
    combine_reports,
    depth_error_maps,
    depth_report,
    epe_map,
    flow_report,
    mean_epe,
)
from uqbench.reference import depth_report_reference


def _flow(arr):
    return Field(np.asarray(arr, dtype=float))


def test_epe_identity():
    gt = _flow(np.random.default_rng(0).random((3, 4, 2)))
    mask = ValidityMask.all_valid(3, 4)
    emap = epe_map(gt, gt, mask)
    assert emap.data.max() == 0.0
    assert mean_epe(gt, gt, mask) == 0.0


def test_epe_hand_case():
    gt = _flow([[[0.0, 0.0]]])
    pred = _flow([[[3.0, 4.0]]])
    mask = ValidityMask.all_valid(1, 1)
    assert epe_map(pred, gt, mask).data[0, 0, 0] == 5.0


def test_mean_epe_two_pixels():
    gt = _flow([[[0.0, 0.0], [1.0, 1.0]]])
    pred = _flow([[[3.0, 4.0], [1.0, 1.0]]])
    assert mean_epe(pred, gt, ValidityMask.all_valid(1, 2)) == 2.5


def test_mean_epe_empty_mask_rejected():
    gt = _flow([[[0.0, 0.0]]])
    with pytest.raises(ValueError, match="no valid pixels"):
        mean_epe(gt, gt, ValidityMask(np.zeros((1, 1), dtype=bool)))


def test_epe_rotation_invariance():
    rng = np.random.default_rng(1)
    gt = rng.random((4, 4, 2))
    pred = rng.random((4, 4, 2))
    theta = 0.77
    rot = np.array(
        [[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]]
    )
    mask = ValidityMask.all_valid(4, 4)
    a = mean_epe(Field(pred), Field(gt), mask)
    b = mean_epe(Field(pred @ rot.T), Field(gt @ rot.T), mask)
    assert abs(a - b) < 1e-12


def test_depth_error_maps_hand_cases():
    gt = Field(np.array([[[2.0], [4.0]]]))
    pred = Field(np.array([[[3.0], [2.0]]]))
    maps = depth_error_maps(pred, gt, ValidityMask.all_valid(1, 2))
    np.testing.assert_allclose(maps["sq_err"].data.ravel(), [1.0, 4.0])
    np.testing.assert_allclose(maps["absrel_err"].data.ravel(), [0.5, 0.5])


def test_depth_error_maps_rejects_nonpositive_gt():
    gt = Field(np.array([[[0.0]]]))
    pred = Field(np.array([[[1.0]]]))
    with pytest.raises(ValueError, match="strictly positive"):
        depth_error_maps(pred, gt, ValidityMask.all_valid(1, 1))


def test_depth_report_identity():
    rng = np.random.default_rng(2)
    gt = Field(rng.uniform(1.0, 10.0, (3, 3, 1)))
    r = depth_report(gt, gt, ValidityMask.all_valid(3, 3))
    assert r.rmse == r.absrel == r.sqrel == r.rmse_log == r.log10 == 0.0
    assert r.d1 == r.d2 == r.d3 == 1.0


def test_depth_report_threshold_boundaries():
    mask = ValidityMask.all_valid(1, 1)
    r = depth_report(Field(np.full((1, 1, 1), 1.2)), Field(np.ones((1, 1, 1))), mask)
    assert r.d1 == 1.0
    assert abs(r.absrel - 0.2) < 1e-12
    assert abs(r.rmse - 0.2) < 1e-12
    r = depth_report(Field(np.full((1, 1, 1), 1.3)), Field(np.ones((1, 1, 1))), mask)
    assert r.d1 == 0.0  # 1.3 >= 1.25: strict inequality makes it an outlier
    assert r.d2 == 1.0  # but 1.3 < 1.5625


def test_depth_report_rejects_nonpositive_pred():
    gt = Field(np.ones((1, 1, 1)))
    pred = Field(np.zeros((1, 1, 1)) - 1.0)
    with pytest.raises(ValueError, match="predicted depth"):
        depth_report(pred, gt, ValidityMask.all_valid(1, 1))


def test_depth_report_matches_loop_reference():
    rng = np.random.default_rng(3)
    for _ in range(25):
        h, w = int(rng.integers(1, 6)), int(rng.integers(1, 6))
        gt = rng.uniform(0.5, 9.0, (h, w))
        pred = gt * rng.uniform(0.6, 1.7, (h, w))
        valid = rng.random((h, w)) < 0.8
        if not valid.any():
            valid[0, 0] = True
        rep = depth_report(Field(pred), Field(gt), ValidityMask(valid))
        ref = depth_report_reference(pred, gt, valid)
        for key, value in ref.items():
            assert abs(getattr(rep, key) - value) < 1e-12


def test_nested_thresholds_property():
    rng = np.random.default_rng(4)
    for _ in range(100):
        gt = rng.uniform(0.2, 20.0, (3, 3))
        pred = rng.uniform(0.2, 20.0, (3, 3))
        r = depth_report(Field(pred), Field(gt), ValidityMask.all_valid(3, 3))
        assert r.d1 <= r.d2 <= r.d3


def test_scaling_properties():
    rng = np.random.default_rng(5)
    gt = rng.uniform(1.0, 5.0, (4, 4))
    pred = rng.uniform(1.0, 5.0, (4, 4))
    mask = ValidityMask.all_valid(4, 4)
    base = depth_report(Field(pred), Field(gt), mask)
    c = 3.7
    scaled = depth_report(Field(c * pred), Field(c * gt), mask)
    assert abs(scaled.absrel - base.absrel) < 1e-12
    assert abs(scaled.rmse - c * base.rmse) < 1e-12
    assert abs(scaled.sqrel - c * base.sqrel) < 1e-12
    assert abs(scaled.rmse_log - base.rmse_log) < 1e-12
    assert abs(scaled.log10 - base.log10) < 1e-12
    assert (scaled.d1, scaled.d2, scaled.d3) == (base.d1, base.d2, base.d3)


def test_zero_error_pixels_never_increase_aggregates():
    gt = np.array([[2.0, 3.0]])
    pred = np.array([[2.5, 4.0]])
    small = depth_report(Field(pred), Field(gt), ValidityMask.all_valid(1, 2))
    gt2 = np.array([[2.0, 3.0, 5.0]])
    pred2 = np.array([[2.5, 4.0, 5.0]])
    grown = depth_report(Field(pred2), Field(gt2), ValidityMask.all_valid(1, 3))
    for key in ("rmse", "absrel", "sqrel", "rmse_log", "log10"):
        assert getattr(grown, key) <= getattr(small, key) + 1e-15


def test_combine_reports_matches_pooled():
    rng = np.random.default_rng(6)
    gt = rng.uniform(1.0, 9.0, (4, 6))
    pred = gt * rng.uniform(0.7, 1.4, (4, 6))
    mask = ValidityMask.all_valid(4, 6)
    pooled = depth_report(Field(pred), Field(gt), mask)
    left = depth_report(Field(pred[:, :2]), Field(gt[:, :2]), ValidityMask.all_valid(4, 2))
    right = depth_report(Field(pred[:, 2:]), Field(gt[:, 2:]), ValidityMask.all_valid(4, 4))
    merged = combine_reports([left, right])
    assert merged.n_valid == pooled.n_valid
    for key in ("rmse", "absrel", "sqrel", "rmse_log", "log10", "d1", "d2", "d3"):
        assert abs(getattr(merged, key) - getattr(pooled, key)) < 1e-12


def test_flow_report():
    gt = _flow([[[0.0, 0.0], [1.0, 1.0]]])
    pred = _flow([[[3.0, 4.0], [1.0, 1.0]]])
    r = flow_report(pred, gt, ValidityMask.all_valid(1, 2))
    assert r.epe == 2.5 and r.n_valid == 2 and r.rmse is None
