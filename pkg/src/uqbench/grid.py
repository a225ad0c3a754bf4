"""Immutable field/mask containers shared by all evaluation code.

A Field is an H x W x C grid of finite float64 values in row-major (y, x, c)
order; a ValidityMask marks which pixels carry usable data (sparse ground
truth). Row-major pixel order is the canonical tie-breaking order everywhere
downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field as _dcfield
from typing import Callable

import numpy as np

from . import _kernels

__all__ = [
    "Field",
    "ValidityMask",
    "PixelSeries",
    "euclidean_norm",
    "extract_valid",
    "densify_for_visualization",
]


def _first_nonfinite(arr):
    flat = np.isfinite(arr).ravel()
    bad = np.flatnonzero(~flat)
    if bad.size == 0:
        return None
    return np.unravel_index(bad[0], arr.shape)


@dataclass(frozen=True)
class Field:
    """Finite-valued H x W x C grid. Data is validated and made read-only."""

    data: np.ndarray
    visualization_only: bool = False

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ValueError(f"field data must be 2-D or 3-D, got ndim={arr.ndim}")
        if min(arr.shape) < 1:
            raise ValueError(f"field dimensions must be positive, got {arr.shape}")
        bad = _first_nonfinite(arr)
        if bad is not None:
            y, x, c = bad
            raise ValueError(f"non-finite value at pixel (y={y}, x={x}, channel={c})")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class ValidityMask:
    """Boolean per-pixel validity; count_valid is cached at construction."""

    valid: np.ndarray
    count_valid: int = _dcfield(init=False)

    def __post_init__(self):
        arr = np.asarray(self.valid)
        if arr.dtype != np.bool_:
            arr = arr != 0
        if arr.ndim != 2 or min(arr.shape) < 1:
            raise ValueError(f"mask must be a 2-D grid, got shape {arr.shape}")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "valid", arr)
        object.__setattr__(self, "count_valid", int(arr.sum()))

    @property
    def height(self) -> int:
        return self.valid.shape[0]

    @property
    def width(self) -> int:
        return self.valid.shape[1]

    @staticmethod
    def all_valid(height: int, width: int) -> "ValidityMask":
        return ValidityMask(np.ones((height, width), dtype=bool))

    def matches(self, field: Field) -> bool:
        return (self.height, self.width) == (field.height, field.width)


@dataclass(frozen=True)
class PixelSeries:
    """Per-valid-pixel values with their row-major pixel indices.

    Indices are strictly increasing, which fixes tie-breaking for every sort
    downstream. May be empty (an image without valid pixels).
    """

    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.ascontiguousarray(np.asarray(self.indices, dtype=np.int64))
        val = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if idx.ndim != 1 or val.ndim != 1 or idx.size != val.size:
            raise ValueError("indices and values must be 1-D and aligned")
        if idx.size and np.any(np.diff(idx) <= 0):
            raise ValueError("pixel indices must be strictly increasing")
        if not np.all(np.isfinite(val)):
            raise ValueError("series values must be finite")
        idx.setflags(write=False)
        val.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    def __len__(self) -> int:
        return int(self.values.size)

    @staticmethod
    def from_values(values) -> "PixelSeries":
        values = np.asarray(values, dtype=np.float64)
        return PixelSeries(np.arange(values.size, dtype=np.int64), values)


def euclidean_norm(channel_values: np.ndarray) -> np.ndarray:
    """Reduce (N, C) per-pixel channel vectors to their Euclidean norms."""
    return np.sqrt(np.sum(channel_values * channel_values, axis=1))


def _check_dims(field: Field, mask: ValidityMask):
    if not mask.matches(field):
        raise ValueError(
            f"mask shape ({mask.height}, {mask.width}) does not match "
            f"field shape ({field.height}, {field.width})"
        )


def extract_valid(
    field: Field,
    mask: ValidityMask,
    channel_reducer: Callable[[np.ndarray], np.ndarray] | None = None,
) -> PixelSeries:
    """Pull the valid pixels of a field into a row-major PixelSeries.

    `channel_reducer` maps the (N, C) block of valid-pixel channel values to
    one scalar per pixel; it defaults to identity for single-channel fields.
    """
    _check_dims(field, mask)
    if mask.count_valid == 0:
        raise ValueError("mask has no valid pixels")
    flat_idx = np.flatnonzero(mask.valid.ravel())
    block = field.data.reshape(-1, field.channels)[flat_idx]
    if channel_reducer is None:
        if field.channels != 1:
            raise ValueError(
                f"a channel reducer is required for {field.channels}-channel fields"
            )
        values = block[:, 0]
    else:
        values = np.asarray(channel_reducer(block), dtype=np.float64)
        if values.shape != (flat_idx.size,):
            raise ValueError("channel reducer must return one scalar per pixel")
    return PixelSeries(flat_idx, values)


def densify_for_visualization(field: Field, mask: ValidityMask) -> Field:
    """Fill invalid pixels from their nearest valid pixel (visualization only).

    Nearest by Euclidean pixel distance, ties resolved to the valid pixel
    earliest in row-major order. Valid pixels are left untouched.
    """
    _check_dims(field, mask)
    if mask.count_valid == 0:
        raise ValueError("cannot densify: mask has no valid pixels")
    if mask.count_valid == mask.height * mask.width:
        return Field(field.data, visualization_only=True)
    filled = _kernels.nearest_valid_fill(field.data, mask.valid)
    return Field(filled, visualization_only=True)
