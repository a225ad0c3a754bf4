import numpy as np
import pytest

from uqbench.grid import Field, PixelSeries, ValidityMask
from uqbench.reference import ause_reference, auroc_reference, sparsification_curve_reference
from uqbench.sparsify import (
    ReliabilityLabels,
    SparsificationConfig,
    ause,
    ause_dataset_wise,
    ause_image_wise,
    auroc,
    oracle_curve,
    reliability_labels_depth,
    reliability_labels_flow,
    sparsification_curve,
    sparsification_result,
)


def series(values):
    return PixelSeries.from_values(np.asarray(values, dtype=float))


def test_config_validation():
    with pytest.raises(ValueError):
        SparsificationConfig(0.0)
    with pytest.raises(ValueError):
        SparsificationConfig(0.6)
    assert SparsificationConfig(0.05).n_steps == 20


def test_curve_scores_equal_errors():
    cfg = SparsificationConfig(0.25, normalize=False)
    curve = sparsification_curve(series([4, 3, 2, 1]), series([4, 3, 2, 1]), cfg)
    np.testing.assert_allclose(curve, [2.5, 2.0, 1.5, 1.0])


def test_curve_constant_scores_removes_in_index_order():
    cfg = SparsificationConfig(0.25, normalize=False)
    curve = sparsification_curve(series([4, 3, 2, 1]), series([0, 0, 0, 0]), cfg)
    # index order removal on decreasing errors coincides with the oracle
    expected = sparsification_curve_reference([4, 3, 2, 1], [0, 0, 0, 0], 0.25)
    np.testing.assert_allclose(curve, expected)
    np.testing.assert_allclose(curve, [2.5, 2.0, 1.5, 1.0])


def test_curve_single_step_zero_errors():
    cfg = SparsificationConfig(0.5, normalize=False)
    curve = sparsification_curve(series([0, 0]), series([1, 2]), cfg)
    np.testing.assert_array_equal(curve, [0.0, 0.0])


def test_oracle_examples():
    cfg = SparsificationConfig(1 / 3, normalize=False)
    np.testing.assert_allclose(oracle_curve(series([1, 5, 3]), cfg), [3.0, 2.0, 1.0])
    const = oracle_curve(series([2.0, 2.0, 2.0]), cfg)
    np.testing.assert_allclose(const, [2.0, 2.0, 2.0])


def test_oracle_is_curve_on_own_errors():
    rng = np.random.default_rng(0)
    errors = series(rng.random(30))
    cfg = SparsificationConfig(0.1)
    np.testing.assert_array_equal(
        oracle_curve(errors, cfg), sparsification_curve(errors, errors, cfg)
    )


def test_ause_zero_when_scores_match_errors():
    rng = np.random.default_rng(1)
    errors = series(rng.random(40))
    assert ause(errors, errors, SparsificationConfig()) == 0.0


def test_ause_worst_ordering_matches_reference():
    # the brute-force oracle fixes the expected value for the reversed ranking
    cfg = SparsificationConfig(0.25, normalize=False)
    value = ause(series([4, 3, 2, 1]), series([-4, -3, -2, -1]), cfg)
    expected = ause_reference([4, 3, 2, 1], [-4, -3, -2, -1], 0.25, normalize=False)
    assert abs(value - expected) < 1e-15
    assert abs(value - 1.125) < 1e-15


def test_ause_invariant_under_increasing_transforms():
    rng = np.random.default_rng(2)
    cfg = SparsificationConfig(0.05)
    for _ in range(25):
        errors = series(rng.random(50))
        scores = rng.random(50)
        base = ause(errors, series(scores), cfg)
        assert abs(ause(errors, series(scores**3), cfg) - base) < 1e-12
        assert abs(ause(errors, series(np.exp(scores)), cfg) - base) < 1e-12


def test_curves_monotone_and_dominating():
    rng = np.random.default_rng(3)
    for _ in range(200):
        n = int(rng.integers(4, 64))
        errors = rng.random(n)
        scores = rng.random(n)
        cfg = SparsificationConfig(0.25, normalize=bool(rng.integers(0, 2)))
        res = sparsification_result(series(errors), series(scores), cfg)
        assert np.all(np.diff(res.oracle_curve) <= 1e-15)
        assert np.all(res.predicted_curve >= res.oracle_curve - 1e-12)
        assert res.ause >= -1e-15


def test_ause_normalized_zero_full_set_error():
    cfg = SparsificationConfig(0.5, normalize=True)
    assert ause(series([0.0, 0.0]), series([1.0, 2.0]), cfg) == 0.0


def test_ause_rmse_statistic_matches_reference():
    rng = np.random.default_rng(4)
    cfg = SparsificationConfig(0.1, normalize=True)
    for _ in range(20):
        sq_errors = rng.random(30) ** 2
        scores = rng.random(30)
        fast = ause(series(sq_errors), series(scores), cfg, statistic="rmse")
        slow = ause_reference(sq_errors, scores, 0.1, normalize=True, statistic="rmse")
        assert abs(fast - slow) < 1e-12


def test_alignment_and_size_errors():
    cfg = SparsificationConfig(0.25)
    with pytest.raises(ValueError, match="same pixels"):
        sparsification_curve(series([1, 2, 3, 4]), series([1, 2, 3]), cfg)
    with pytest.raises(ValueError, match="at least"):
        sparsification_curve(series([1, 2, 3]), series([1, 2, 3]), cfg)
    mismatched = PixelSeries(np.array([0, 1, 2, 4]), np.ones(4))
    with pytest.raises(ValueError, match="same pixels"):
        sparsification_curve(series([1, 2, 3, 4]), mismatched, cfg)


def test_image_wise_basics():
    cfg = SparsificationConfig(0.5)
    errors = series([1.0, 2.0])
    scores = series([2.0, 1.0])
    single = ause_image_wise([(errors, scores)], cfg)
    assert single.value == ause(errors, scores, cfg)
    assert single.n_images == 1 and single.n_skipped == 0

    e2, s2 = series([5.0, 1.0]), series([1.0, 5.0])
    two = ause_image_wise([(errors, scores), (e2, s2)], cfg)
    expected = 0.5 * (ause(errors, scores, cfg) + ause(e2, s2, cfg))
    assert abs(two.value - expected) < 1e-15


def test_image_wise_skips_empty_images():
    cfg = SparsificationConfig(0.5)
    empty = series([])
    errors, scores = series([1.0, 2.0]), series([2.0, 1.0])
    agg = ause_image_wise([(empty, empty), (errors, scores)], cfg)
    assert agg.n_skipped == 1 and agg.n_images == 1
    with pytest.raises(ValueError, match="empty"):
        ause_image_wise([(empty, empty)], cfg)


def test_image_wise_differs_from_dataset_wise():
    # per-image rankings are both wrong, but pooled ranking is perfect
    cfg = SparsificationConfig(0.5)
    img1 = (series([1.0, 2.0]), series([2.0, 1.0]))
    img2 = (series([10.0, 20.0]), series([20.0, 10.0]))
    image_wise = ause_image_wise([img1, img2], cfg).value
    dataset_wise = ause_dataset_wise([img1, img2], cfg)
    assert abs(dataset_wise) < 1e-15
    assert image_wise > 0.05


def test_reliability_labels_depth():
    mask = ValidityMask.all_valid(1, 3)
    gt = Field(np.ones((1, 3, 1)))
    pred = Field(np.array([[[1.2], [1.3], [1.0]]]))
    labels = reliability_labels_depth(pred, gt, mask)
    np.testing.assert_array_equal(labels.labels, [True, False, True])


def test_reliability_labels_flow_strict_below():
    mask = ValidityMask.all_valid(1, 3)
    gt = Field(np.zeros((1, 3, 2)))
    pred = Field(np.array([[[0.0, 0.0], [3.0, 4.0], [2.0, 0.0]]]))
    labels = reliability_labels_flow(pred, gt, mask, k=2.0)
    # EPE exactly 2 is unreliable ("below" is strict)
    np.testing.assert_array_equal(labels.labels, [True, False, False])


def test_auroc_examples():
    unreliable = ReliabilityLabels(np.array([False, True, False, True]))
    # scores equal to the indicator of the unreliable class: perfect detector
    assert auroc(series([0.0, 1.0, 0.0, 1.0]), unreliable) == 1.0
    constant = auroc(series([0.5, 0.5, 0.5, 0.5]), unreliable)
    assert constant == 0.5
    labels = ReliabilityLabels(np.array([True, False, True]))
    assert auroc(series([0.1, 0.9, 0.4]), labels) == 1.0


def test_auroc_degenerate_labels():
    with pytest.raises(ValueError, match="reliable"):
        auroc(series([1.0, 2.0]), ReliabilityLabels(np.array([True, True])))
    with pytest.raises(ValueError, match="unreliable"):
        auroc(series([1.0, 2.0]), ReliabilityLabels(np.array([False, False])))


def test_auroc_monotone_invariance_and_complement():
    rng = np.random.default_rng(5)
    for _ in range(50):
        n = int(rng.integers(4, 64))
        scores = rng.random(n)  # continuous: no ties
        labels = rng.random(n) < 0.5
        if labels.all() or not labels.any():
            continue
        rl = ReliabilityLabels(labels)
        base = auroc(series(scores), rl)
        assert abs(auroc(series(scores**3), rl) - base) < 1e-12
        assert abs(auroc(series(np.exp(scores)), rl) - base) < 1e-12
        assert abs(auroc(series(-scores), rl) + base - 1.0) < 1e-12


def test_auroc_matches_pairwise_reference_with_ties():
    rng = np.random.default_rng(6)
    for _ in range(100):
        n = int(rng.integers(4, 64))
        scores = rng.integers(0, 6, size=n).astype(float)  # heavy ties
        labels = rng.random(n) < 0.5
        if labels.all() or not labels.any():
            continue
        fast = auroc(series(scores), ReliabilityLabels(labels))
        slow = auroc_reference(scores, ~labels)
        assert abs(fast - slow) < 1e-12
