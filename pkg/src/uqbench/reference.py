"""Independent brute-force references for the fast evaluation paths.

These deliberately use plain Python loops and O(N^2) pairwise counting so
they share no code with `sparsify` or `metrics` beyond the removal-count
convention. The selftest CLI subcommand and the acceptance suite compare the
production implementations against them on randomized instances.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "sparsification_curve_reference",
    "ause_reference",
    "auroc_reference",
    "depth_report_reference",
    "run_selftest",
]


def sparsification_curve_reference(errors, scores, m, statistic="mean"):
    """Explicit remove-and-average loop with descending-score, index-tie order."""
    errors = [float(e) for e in errors]
    scores = [float(s) for s in scores]
    n = len(errors)
    steps = math.floor(1.0 / m)
    order = sorted(range(n), key=lambda i: (-scores[i], i))
    curve = []
    for j in range(steps):
        removed = min(math.floor(j * m * n + 0.5), n - 1)
        kept = order[removed:]
        total = 0.0
        for i in kept:
            total += errors[i]
        value = total / len(kept)
        if statistic == "rmse":
            value = math.sqrt(value)
        curve.append(value)
    return curve


def ause_reference(errors, scores, m, normalize=True, statistic="mean"):
    predicted = sparsification_curve_reference(errors, scores, m, statistic)
    oracle = sparsification_curve_reference(errors, errors, m, statistic)
    if normalize:
        full = predicted[0]
        if full == 0.0:
            return 0.0
        predicted = [p / full for p in predicted]
        oracle = [o / full for o in oracle]
    area = 0.0
    for j in range(len(predicted) - 1):
        a = predicted[j] - oracle[j]
        b = predicted[j + 1] - oracle[j + 1]
        area += 0.5 * (a + b) * m
    return area


def auroc_reference(scores, unreliable):
    """Pairwise Mann-Whitney counting; ties contribute one half."""
    pos = [float(s) for s, u in zip(scores, unreliable) if u]
    neg = [float(s) for s, u in zip(scores, unreliable) if not u]
    if not pos or not neg:
        raise ValueError("need both classes")
    wins = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                wins += 1.0
            elif sp == sn:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def depth_report_reference(pred, gt, valid, thr=1.25):
    """Loop-based recomputation of the depth metric suite."""
    d_vals, dh_vals = [], []
    h, w = valid.shape
    for y in range(h):
        for x in range(w):
            if valid[y, x]:
                d_vals.append(float(gt[y, x]))
                dh_vals.append(float(pred[y, x]))
    n = len(d_vals)
    sq = absrel = sqrel = logsq = log10 = 0.0
    inliers = [0, 0, 0]
    for d, dh in zip(d_vals, dh_vals):
        diff = dh - d
        sq += diff * diff
        absrel += abs(diff) / d
        sqrel += diff * diff / d
        logsq += (math.log(dh) - math.log(d)) ** 2
        log10 += abs(math.log10(dh) - math.log10(d))
        delta = max(dh / d, d / dh)
        for k in range(3):
            if delta < thr ** (k + 1):
                inliers[k] += 1
    return {
        "n_valid": n,
        "rmse": math.sqrt(sq / n),
        "absrel": absrel / n,
        "sqrel": sqrel / n,
        "rmse_log": math.sqrt(logsq / n),
        "log10": log10 / n,
        "d1": inliers[0] / n,
        "d2": inliers[1] / n,
        "d3": inliers[2] / n,
    }


def _random_instance(rng, max_pixels=64):
    n = int(rng.integers(4, max_pixels + 1))
    errors = rng.random(n)
    scores = rng.random(n)
    # inject duplicates to exercise tie handling
    if n >= 8:
        dup = rng.integers(0, n, size=n // 4)
        scores[dup] = scores[dup[0]]
        errors[dup[: n // 8]] = errors[dup[0]]
    return errors, scores


def run_selftest(n_instances=200, seed=0):
    """Compare ause/auroc/depth metrics against the brute-force references.

    Returns a dict of maximum absolute deviations across all instances.
    """
    from .grid import Field, PixelSeries, ValidityMask
    from .metrics import depth_report
    from .sparsify import ReliabilityLabels, SparsificationConfig, ause, auroc

    rng = np.random.default_rng(seed)
    dev_ause = dev_auroc = dev_metrics = 0.0
    for _ in range(n_instances):
        errors, scores = _random_instance(rng)
        n = errors.size
        m = float(rng.choice([0.05, 0.1, 0.2, 0.25, 0.5]))
        if n < math.ceil(1.0 / m):
            m = 0.5
        normalize = bool(rng.integers(0, 2))
        statistic = "rmse" if rng.integers(0, 2) else "mean"
        cfg = SparsificationConfig(fraction_step=m, normalize=normalize)
        fast = ause(
            PixelSeries.from_values(errors),
            PixelSeries.from_values(scores),
            cfg,
            statistic,
        )
        slow = ause_reference(errors, scores, m, normalize, statistic)
        dev_ause = max(dev_ause, abs(fast - slow))

        labels = errors < float(np.median(errors))
        if labels.any() and not labels.all():
            fast = auroc(
                PixelSeries.from_values(scores), ReliabilityLabels(labels)
            )
            slow = auroc_reference(scores, ~labels)
            dev_auroc = max(dev_auroc, abs(fast - slow))

        h, w = int(rng.integers(2, 7)), int(rng.integers(2, 7))
        gt = rng.uniform(0.5, 10.0, size=(h, w))
        pred = gt * rng.uniform(0.5, 2.0, size=(h, w))
        valid = rng.random((h, w)) < 0.8
        if not valid.any():
            valid[0, 0] = True
        rep = depth_report(Field(pred), Field(gt), ValidityMask(valid))
        ref = depth_report_reference(pred, gt, valid)
        for key, value in ref.items():
            dev_metrics = max(dev_metrics, abs(getattr(rep, key) - value))
    return {"ause": dev_ause, "auroc": dev_auroc, "depth_metrics": dev_metrics}
