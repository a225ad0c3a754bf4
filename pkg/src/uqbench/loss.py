"""Training losses with analytic gradients.

The side-learner recipe: take the absolute prediction error, squash it into
[0, 1) with tanh(lambda * err), then fit it with a binary cross entropy on
logits whose optimum is sigmoid(logit) == target. MSE and Gaussian/Laplacian
negative log-likelihoods cover the baselines. Everything is vectorized and
returns per-element values; batch reduction is the trainer's job (we use the
mean).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LossConfig",
    "LOSS_KINDS",
    "DEPTH_STRETCH",
    "FLOW_STRETCH",
    "natural_error",
    "scale_target",
    "sigmoid",
    "bce_loss",
    "mse_loss",
    "gaussian_nll",
    "laplacian_nll",
]

LOSS_KINDS = ("bce_scaled", "mse_raw", "gaussian_nll", "laplacian_nll")

# documented stretch defaults for the pixel tasks (depth, flow)
DEPTH_STRETCH = 0.0125
FLOW_STRETCH = 0.05

_LN2 = float(np.log(2.0))
_HALF_LN_2PI = float(0.5 * np.log(2.0 * np.pi))


@dataclass(frozen=True)
class LossConfig:
    kind: str = "bce_scaled"
    stretch: float = DEPTH_STRETCH  # lambda in the target scaling

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"kind must be one of {LOSS_KINDS}, got {self.kind!r}")
        if not self.stretch > 0:
            raise ValueError(f"stretch must be positive, got {self.stretch}")


def natural_error(pred, gt) -> np.ndarray:
    """Absolute error per output; Euclidean norm across channels if 2-D (N, C)."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    diff = pred - gt
    if diff.ndim <= 1:
        return np.abs(diff)
    if diff.ndim == 2:
        return np.sqrt(np.sum(diff * diff, axis=1))
    raise ValueError(f"expected scalar, 1-D or (N, C) inputs, got ndim={diff.ndim}")


def scale_target(l_u, stretch: float) -> np.ndarray:
    """Soft-clip a nonnegative error into [0, 1): tanh(stretch * error)."""
    if not stretch > 0:
        raise ValueError(f"stretch must be positive, got {stretch}")
    return np.tanh(stretch * np.asarray(l_u, dtype=np.float64))


def sigmoid(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce_loss(target, logit):
    """Binary cross entropy on logits, in overflow-safe form.

    Returns (loss, dloss/dlogit). The gradient is sigmoid(logit) - target, so
    the optimum satisfies sigmoid(logit) == target.
    """
    t = np.asarray(target, dtype=np.float64)
    z = np.asarray(logit, dtype=np.float64)
    if np.any(t < 0) or np.any(t > 1):
        raise ValueError("targets must lie in [0, 1]")
    loss = np.maximum(z, 0.0) - z * t + np.log1p(np.exp(-np.abs(z)))
    grad = sigmoid(z) - t
    return loss, grad


def mse_loss(target, output):
    t = np.asarray(target, dtype=np.float64)
    o = np.asarray(output, dtype=np.float64)
    diff = o - t
    return diff * diff, 2.0 * diff


def gaussian_nll(mu, log_var, y):
    """Gaussian NLL with log-space variance; returns (loss, dmu, dlog_var)."""
    mu = np.asarray(mu, dtype=np.float64)
    lv = np.asarray(log_var, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    inv_var = np.exp(-lv)
    resid = y - mu
    loss = 0.5 * lv + 0.5 * resid * resid * inv_var + _HALF_LN_2PI
    dmu = -resid * inv_var
    dlv = 0.5 - 0.5 * resid * resid * inv_var
    return loss, dmu, dlv


def laplacian_nll(mu, log_b, y):
    """Laplacian NLL with log-space scale; subgradient 0 at y == mu."""
    mu = np.asarray(mu, dtype=np.float64)
    lb = np.asarray(log_b, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    inv_b = np.exp(-lb)
    resid = y - mu
    loss = lb + np.abs(resid) * inv_b + _LN2
    dmu = -np.sign(resid) * inv_b
    dlb = 1.0 - np.abs(resid) * inv_b
    return loss, dmu, dlb
