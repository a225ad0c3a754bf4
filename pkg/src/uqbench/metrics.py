"""Per-pixel error maps and aggregate accuracy metrics for depth and flow.

Depth metrics: RMSE, Absrel, SqRel, RMSElog (natural log), log10, and the
inlier ratios d1/d2/d3 with delta = max(pred/gt, gt/pred) < thr^k (strict,
thr = 1.25 by default). Flow metric: mean end-point error over valid pixels.
Invalid pixels carry 0 in error maps as a placeholder only; every aggregate
consumes masked pixels exclusively.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Field, ValidityMask, _check_dims

__all__ = [
    "MetricReport",
    "epe_map",
    "mean_epe",
    "depth_error_maps",
    "depth_report",
    "flow_report",
    "combine_reports",
]


@dataclass(frozen=True)
class MetricReport:
    """Aggregate metrics over valid pixels; unused entries stay None."""

    n_valid: int
    epe: float | None = None
    rmse: float | None = None
    absrel: float | None = None
    sqrel: float | None = None
    rmse_log: float | None = None
    log10: float | None = None
    d1: float | None = None
    d2: float | None = None
    d3: float | None = None

    def as_dict(self) -> dict:
        return {
            "n_valid": self.n_valid,
            "epe": self.epe,
            "rmse": self.rmse,
            "absrel": self.absrel,
            "sqrel": self.sqrel,
            "rmse_log": self.rmse_log,
            "log10": self.log10,
            "d1": self.d1,
            "d2": self.d2,
            "d3": self.d3,
        }


def _check_flow_pair(pred: Field, gt: Field, mask: ValidityMask):
    if pred.channels != 2 or gt.channels != 2:
        raise ValueError("flow fields must have 2 channels")
    if pred.data.shape != gt.data.shape:
        raise ValueError(
            f"prediction shape {pred.data.shape} != ground truth shape {gt.data.shape}"
        )
    _check_dims(pred, mask)


def _check_depth_pair(pred: Field, gt: Field, mask: ValidityMask):
    if pred.channels != 1 or gt.channels != 1:
        raise ValueError("depth fields must have 1 channel")
    if pred.data.shape != gt.data.shape:
        raise ValueError(
            f"prediction shape {pred.data.shape} != ground truth shape {gt.data.shape}"
        )
    _check_dims(pred, mask)


def _require_valid(mask: ValidityMask):
    if mask.count_valid == 0:
        raise ValueError("no valid pixels: aggregate metrics are undefined")


def epe_map(pred_flow: Field, gt_flow: Field, mask: ValidityMask) -> Field:
    """Per-pixel Euclidean distance between predicted and true flow vectors."""
    _check_flow_pair(pred_flow, gt_flow, mask)
    diff = pred_flow.data - gt_flow.data
    epe = np.sqrt(diff[:, :, 0] ** 2 + diff[:, :, 1] ** 2)
    epe = np.where(mask.valid, epe, 0.0)
    return Field(epe)


def mean_epe(pred_flow: Field, gt_flow: Field, mask: ValidityMask) -> float:
    _check_flow_pair(pred_flow, gt_flow, mask)
    _require_valid(mask)
    emap = epe_map(pred_flow, gt_flow, mask)
    return float(emap.data[:, :, 0][mask.valid].mean())


def depth_error_maps(pred: Field, gt: Field, mask: ValidityMask) -> dict[str, Field]:
    """Per-pixel squared error and absolute relative error maps."""
    _check_depth_pair(pred, gt, mask)
    d = gt.data[:, :, 0]
    dh = pred.data[:, :, 0]
    if np.any(d[mask.valid] <= 0):
        raise ValueError("ground-truth depth must be strictly positive on valid pixels")
    diff = dh - d
    sq = np.where(mask.valid, diff * diff, 0.0)
    # gt guarded against division by zero on invalid pixels only
    absrel = np.where(mask.valid, np.abs(diff) / np.where(mask.valid, d, 1.0), 0.0)
    return {"sq_err": Field(sq), "absrel_err": Field(absrel)}


def depth_report(
    pred: Field, gt: Field, mask: ValidityMask, thr: float = 1.25
) -> MetricReport:
    """Full depth metric suite over valid pixels."""
    _check_depth_pair(pred, gt, mask)
    _require_valid(mask)
    if not thr > 1:
        raise ValueError(f"threshold must be > 1, got {thr}")
    d = gt.data[:, :, 0][mask.valid]
    dh = pred.data[:, :, 0][mask.valid]
    if np.any(d <= 0):
        raise ValueError("ground-truth depth must be strictly positive on valid pixels")
    if np.any(dh <= 0):
        # log metrics are undefined; refuse rather than clamp silently
        raise ValueError("predicted depth must be strictly positive for log metrics")
    diff = dh - d
    delta = np.maximum(dh / d, d / dh)
    log_diff = np.log(dh) - np.log(d)
    report = MetricReport(
        n_valid=int(d.size),
        rmse=float(np.sqrt(np.mean(diff**2))),
        absrel=float(np.mean(np.abs(diff) / d)),
        sqrel=float(np.mean(diff**2 / d)),
        rmse_log=float(np.sqrt(np.mean(log_diff**2))),
        log10=float(np.mean(np.abs(np.log10(dh) - np.log10(d)))),
        d1=float(np.mean(delta < thr)),
        d2=float(np.mean(delta < thr**2)),
        d3=float(np.mean(delta < thr**3)),
    )
    return report


def flow_report(pred_flow: Field, gt_flow: Field, mask: ValidityMask) -> MetricReport:
    return MetricReport(n_valid=mask.count_valid, epe=mean_epe(pred_flow, gt_flow, mask))


def combine_reports(reports: list[MetricReport]) -> MetricReport:
    """Merge per-image reports into a pooled report weighted by n_valid.

    Quadratic means (RMSE, RMSElog) are merged through their squares so the
    result equals a single pooled computation.
    """
    if not reports:
        raise ValueError("cannot combine an empty list of reports")
    total = sum(r.n_valid for r in reports)
    if total == 0:
        raise ValueError("no valid pixels across reports")

    def wmean(values):
        if any(v is None for v in values):
            return None
        return sum(v * r.n_valid for v, r in zip(values, reports)) / total

    rmse_sq = wmean([None if r.rmse is None else r.rmse**2 for r in reports])
    rmse_log_sq = wmean([None if r.rmse_log is None else r.rmse_log**2 for r in reports])
    return MetricReport(
        n_valid=total,
        epe=wmean([r.epe for r in reports]),
        rmse=None if rmse_sq is None else float(np.sqrt(rmse_sq)),
        absrel=wmean([r.absrel for r in reports]),
        sqrel=wmean([r.sqrel for r in reports]),
        rmse_log=None if rmse_log_sq is None else float(np.sqrt(rmse_log_sq)),
        log10=wmean([r.log10 for r in reports]),
        d1=wmean([r.d1 for r in reports]),
        d2=wmean([r.d2 for r in reports]),
        d3=wmean([r.d3 for r in reports]),
    )
