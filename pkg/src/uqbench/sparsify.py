"""Sparsification curves, AUSE and AUROC.

The sparsification curve iteratively removes the fraction of pixels with the
highest ranking score and records the error statistic of the remainder; the
oracle curve removes by true error instead. AUSE is the trapezoidal area
between the two curves. AUROC treats the uncertainty score as a detector of
unreliable pixels (positive class = unreliable) and is computed with the
Mann-Whitney rank statistic, ties contributing one half.

All rankings break ties by ascending pixel index (stable), so results are
deterministic and exactly reproducible against the brute-force references in
`uqbench.reference`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .grid import Field, PixelSeries, ValidityMask, _check_dims
from .metrics import _check_depth_pair, _check_flow_pair

__all__ = [
    "SparsificationConfig",
    "SparsificationResult",
    "ReliabilityLabels",
    "ImageWiseAuse",
    "sparsification_curve",
    "oracle_curve",
    "sparsification_result",
    "ause",
    "ause_image_wise",
    "ause_dataset_wise",
    "reliability_labels_depth",
    "reliability_labels_flow",
    "auroc",
]

STATISTICS = ("mean", "rmse")


@dataclass(frozen=True)
class SparsificationConfig:
    """Protocol parameters: removal fraction per step and curve normalization."""

    fraction_step: float = 0.05
    normalize: bool = True

    def __post_init__(self):
        if not 0.0 < self.fraction_step <= 0.5:
            raise ValueError(
                f"fraction_step must be in (0, 0.5], got {self.fraction_step}"
            )

    @property
    def n_steps(self) -> int:
        return int(math.floor(1.0 / self.fraction_step))

    def fractions(self) -> np.ndarray:
        return self.fraction_step * np.arange(self.n_steps, dtype=np.float64)


@dataclass(frozen=True)
class SparsificationResult:
    fractions: np.ndarray
    predicted_curve: np.ndarray
    oracle_curve: np.ndarray
    ause: float


@dataclass(frozen=True)
class ReliabilityLabels:
    """Per-valid-pixel booleans, True = reliable, aligned with a PixelSeries."""

    labels: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.labels, dtype=bool))
        if arr.ndim != 1:
            raise ValueError("labels must be 1-D")
        arr.setflags(write=False)
        object.__setattr__(self, "labels", arr)

    def __len__(self) -> int:
        return int(self.labels.size)


@dataclass(frozen=True)
class ImageWiseAuse:
    """Mean per-image AUSE plus diagnostics about skipped empty images."""

    value: float
    n_images: int
    n_skipped: int


def _check_statistic(statistic: str):
    if statistic not in STATISTICS:
        raise ValueError(f"statistic must be one of {STATISTICS}, got {statistic!r}")


def _check_aligned(errors: PixelSeries, scores: PixelSeries):
    if len(errors) != len(scores) or not np.array_equal(errors.indices, scores.indices):
        raise ValueError("error and score series must cover the same pixels in order")


def removal_counts(n: int, cfg: SparsificationConfig) -> np.ndarray:
    """Pixels removed at each step: round(j*m*n), capped so one pixel stays."""
    m = cfg.fraction_step
    counts = np.floor(np.arange(cfg.n_steps) * m * n + 0.5).astype(np.int64)
    return np.minimum(counts, n - 1)


def _curve(errors, scores, cfg, statistic):
    n = len(errors)
    if n < math.ceil(1.0 / cfg.fraction_step):
        raise ValueError(
            f"need at least {math.ceil(1.0 / cfg.fraction_step)} pixels for "
            f"fraction_step={cfg.fraction_step}, got {n}"
        )
    # descending score, ties by ascending pixel index (series order)
    order = np.argsort(-scores, kind="stable")
    ordered = np.ascontiguousarray(errors[order])
    counts = removal_counts(n, cfg)
    return _kernels.suffix_stat_curve(ordered, counts, statistic == "rmse")


def sparsification_curve(
    errors: PixelSeries,
    ranking_scores: PixelSeries,
    cfg: SparsificationConfig,
    statistic: str = "mean",
) -> np.ndarray:
    """Remaining-error curve as the most-uncertain pixels are removed.

    Entry j is the `statistic` of the errors still present after erasing the
    round(j*m*N) pixels with the highest ranking scores.
    """
    _check_statistic(statistic)
    _check_aligned(errors, ranking_scores)
    return _curve(errors.values, ranking_scores.values, cfg, statistic)


def oracle_curve(
    errors: PixelSeries, cfg: SparsificationConfig, statistic: str = "mean"
) -> np.ndarray:
    """Best achievable curve: pixels removed by their true error."""
    _check_statistic(statistic)
    return _curve(errors.values, errors.values, cfg, statistic)


def _trapezoid(diff: np.ndarray, dx: float) -> float:
    return float(0.5 * dx * np.sum(diff[:-1] + diff[1:]))


def sparsification_result(
    errors: PixelSeries,
    ranking_scores: PixelSeries,
    cfg: SparsificationConfig,
    statistic: str = "mean",
) -> SparsificationResult:
    _check_statistic(statistic)
    _check_aligned(errors, ranking_scores)
    predicted = _curve(errors.values, ranking_scores.values, cfg, statistic)
    oracle = _curve(errors.values, errors.values, cfg, statistic)
    if cfg.normalize:
        full = predicted[0]
        if full == 0.0:
            # perfect prediction leaves no ordering to evaluate
            zeros = np.zeros_like(predicted)
            return SparsificationResult(cfg.fractions(), zeros, zeros, 0.0)
        predicted = predicted / full
        oracle = oracle / full
    area = _trapezoid(predicted - oracle, cfg.fraction_step)
    return SparsificationResult(cfg.fractions(), predicted, oracle, area)


def ause(
    errors: PixelSeries,
    ranking_scores: PixelSeries,
    cfg: SparsificationConfig,
    statistic: str = "mean",
) -> float:
    """Area between the predicted and oracle sparsification curves."""
    return sparsification_result(errors, ranking_scores, cfg, statistic).ause


def ause_image_wise(
    per_image: list[tuple[PixelSeries, PixelSeries]],
    cfg: SparsificationConfig,
    statistic: str = "mean",
) -> ImageWiseAuse:
    """Mean of per-image AUSE values; images without valid pixels are skipped."""
    values = []
    skipped = 0
    for errors, scores in per_image:
        if len(errors) == 0:
            skipped += 1
            continue
        values.append(ause(errors, scores, cfg, statistic))
    if not values:
        raise ValueError("all images were empty")
    return ImageWiseAuse(float(np.mean(values)), len(values), skipped)


def ause_dataset_wise(
    per_image: list[tuple[PixelSeries, PixelSeries]],
    cfg: SparsificationConfig,
    statistic: str = "mean",
) -> float:
    """AUSE over the pooled pixels of all images (image order, then row-major)."""
    err_parts, score_parts = [], []
    for errors, scores in per_image:
        _check_aligned(errors, scores)
        if len(errors) == 0:
            continue
        err_parts.append(errors.values)
        score_parts.append(scores.values)
    if not err_parts:
        raise ValueError("all images were empty")
    pooled_err = PixelSeries.from_values(np.concatenate(err_parts))
    pooled_scores = PixelSeries.from_values(np.concatenate(score_parts))
    return ause(pooled_err, pooled_scores, cfg, statistic)


def reliability_labels_depth(
    pred: Field, gt: Field, mask: ValidityMask, thr: float = 1.25
) -> ReliabilityLabels:
    """Reliable iff max(pred/gt, gt/pred) < thr (the d1 inlier criterion)."""
    _check_depth_pair(pred, gt, mask)
    d = gt.data[:, :, 0][mask.valid]
    dh = pred.data[:, :, 0][mask.valid]
    if np.any(d <= 0) or np.any(dh <= 0):
        raise ValueError("depth values must be strictly positive on valid pixels")
    delta = np.maximum(dh / d, d / dh)
    return ReliabilityLabels(delta < thr)


def reliability_labels_flow(
    pred_flow: Field, gt_flow: Field, mask: ValidityMask, k: float = 2.0
) -> ReliabilityLabels:
    """Reliable iff the per-pixel end-point error is strictly below k."""
    _check_flow_pair(pred_flow, gt_flow, mask)
    diff = (pred_flow.data - gt_flow.data)[mask.valid]
    epe = np.sqrt(diff[:, 0] ** 2 + diff[:, 1] ** 2)
    return ReliabilityLabels(epe < k)


def auroc(scores: PixelSeries, labels: ReliabilityLabels) -> float:
    """Area under the ROC of the score as an unreliable-pixel detector.

    Mann-Whitney rank form; ties contribute one half. Invariant under any
    strictly increasing transform of the scores, so the paper's min-max
    scaling is omitted without effect.
    """
    if len(scores) != len(labels):
        raise ValueError("scores and labels must have equal length")
    positive = ~labels.labels  # unreliable pixels
    n_pos = int(positive.sum())
    n_neg = int(labels.labels.sum())
    if n_pos == 0:
        raise ValueError("degenerate labels: every pixel is reliable")
    if n_neg == 0:
        raise ValueError("degenerate labels: every pixel is unreliable")
    ranks = _kernels.tie_average_ranks(scores.values)
    rank_sum = float(ranks[positive].sum())
    return (rank_sum - 0.5 * n_pos * (n_pos + 1)) / (n_pos * n_neg)
