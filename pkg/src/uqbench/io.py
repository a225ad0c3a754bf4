"""On-disk formats: PFM float maps, PGM masks, JSON manifests, report exports.

PFM stores one float32 payload per channel, rows bottom-up, with the sign of
the scale line encoding endianness (negative = little-endian). Two-channel
flow embeds in a 3-channel "PF" file with a zeroed third channel. Masks are
PGM (nonzero = valid). The manifest is a JSON file listing prediction /
uncertainty / ground-truth paths per entry; loader errors always name the
entry index and field.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .grid import Field, ValidityMask

__all__ = [
    "InputError",
    "Manifest",
    "ManifestEntry",
    "read_pfm",
    "write_pfm",
    "read_mask_pgm",
    "write_mask_pgm",
    "load_manifest",
    "export_curves_csv",
    "export_report_json",
    "format_float",
]


class InputError(ValueError):
    """Malformed or inconsistent user input (file, header, manifest)."""


def format_float(x) -> str:
    """Shortest decimal that round-trips the double exactly."""
    return repr(float(x))


# ---------------------------------------------------------------------------
# PFM


def _read_token(fh, path) -> bytes:
    token = b""
    while True:
        c = fh.read(1)
        if not c:
            raise InputError(f"{path}: unexpected end of file in PFM header")
        if c in b" \t\r\n":
            if token:
                return token
            continue
        token += c


def read_pfm(path, channels: int | None = None) -> Field:
    """Read a PFM file into a Field.

    `channels` optionally pins the expected channel count (1 for depth or
    uncertainty, 2 for flow); a 2-channel request reads a 3-channel "PF" file
    and drops the padding channel.
    """
    with open(path, "rb") as fh:
        magic = _read_token(fh, path)
        if magic == b"PF":
            file_channels = 3
        elif magic == b"Pf":
            file_channels = 1
        else:
            raise InputError(f"{path}: not a PFM file (header {magic!r})")
        try:
            width = int(_read_token(fh, path))
            height = int(_read_token(fh, path))
            scale = float(_read_token(fh, path))
        except ValueError as exc:
            raise InputError(f"{path}: malformed PFM header ({exc})") from exc
        if width < 1 or height < 1:
            raise InputError(f"{path}: bad dimensions {width}x{height}")
        if scale == 0:
            raise InputError(f"{path}: scale must be nonzero")
        dtype = "<f4" if scale < 0 else ">f4"
        count = width * height * file_channels
        payload = fh.read(4 * count)
    if len(payload) != 4 * count:
        raise InputError(
            f"{path}: truncated payload ({len(payload)} of {4 * count} bytes)"
        )
    data = np.frombuffer(payload, dtype=dtype).astype(np.float64)
    data = data.reshape(height, width, file_channels)[::-1]  # bottom-up rows
    bad = np.argwhere(~np.isfinite(data))
    if bad.size:
        y, x, _ = bad[0]
        raise InputError(f"{path}: non-finite value at pixel (y={y}, x={x})")
    if channels is not None:
        if channels == file_channels:
            pass
        elif channels == 2 and file_channels == 3:
            data = data[:, :, :2]
        else:
            raise InputError(
                f"{path}: expected {channels} channel(s), file has {file_channels}"
            )
    return Field(data)


def write_pfm(field: Field, path):
    """Write a Field as little-endian PFM (payload is 32-bit float)."""
    data = field.data
    if field.channels == 1:
        magic = b"Pf"
    elif field.channels in (2, 3):
        magic = b"PF"
        if field.channels == 2:
            data = np.concatenate(
                [data, np.zeros((field.height, field.width, 1))], axis=2
            )
    else:
        raise InputError(f"cannot encode {field.channels}-channel field as PFM")
    with open(path, "wb") as fh:
        fh.write(magic + b"\n")
        fh.write(f"{field.width} {field.height}\n".encode())
        fh.write(b"-1.0\n")
        fh.write(np.ascontiguousarray(data[::-1], dtype="<f4").tobytes())


# ---------------------------------------------------------------------------
# PGM masks


def read_mask_pgm(path) -> ValidityMask:
    """Read a PGM (P5 binary or P2 ascii); nonzero pixels are valid."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = []
    i = 0
    while len(tokens) < 4 and i < len(data):
        while i < len(data) and data[i : i + 1] in b" \t\r\n":
            i += 1
        if data[i : i + 1] == b"#":  # comment line
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
            continue
        start = i
        while i < len(data) and data[i : i + 1] not in b" \t\r\n":
            i += 1
        tokens.append(data[start:i])
    if len(tokens) < 4:
        raise InputError(f"{path}: truncated PGM header")
    magic = tokens[0]
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError as exc:
        raise InputError(f"{path}: malformed PGM header ({exc})") from exc
    if maxval < 1 or maxval > 65535:
        raise InputError(f"{path}: unsupported maxval {maxval}")
    if magic == b"P5":
        i += 1  # single whitespace after maxval
        dtype = np.uint8 if maxval < 256 else ">u2"
        count = width * height
        pixels = np.frombuffer(data, dtype=dtype, count=count, offset=i)
        if pixels.size != count:
            raise InputError(f"{path}: truncated PGM payload")
    elif magic == b"P2":
        try:
            pixels = np.array(data[i:].split(), dtype=np.int64)
        except ValueError as exc:
            raise InputError(f"{path}: malformed P2 payload ({exc})") from exc
        if pixels.size != width * height:
            raise InputError(f"{path}: expected {width * height} pixels, got {pixels.size}")
    else:
        raise InputError(f"{path}: not a PGM file (header {magic!r})")
    return ValidityMask(pixels.reshape(height, width) != 0)


def write_mask_pgm(mask: ValidityMask, path):
    with open(path, "wb") as fh:
        fh.write(f"P5\n{mask.width} {mask.height}\n255\n".encode())
        fh.write((mask.valid.astype(np.uint8) * 255).tobytes())


# ---------------------------------------------------------------------------
# manifest


@dataclass(frozen=True)
class ManifestEntry:
    prediction_path: str
    uncertainty_path: str
    ground_truth_path: str
    mask_path: str | None = None


@dataclass(frozen=True)
class Manifest:
    task: str
    entries: tuple[ManifestEntry, ...]
    options: dict

    @property
    def channels(self) -> int:
        return 2 if self.task == "flow" else 1


_ENTRY_FIELDS = ("prediction_path", "uncertainty_path", "ground_truth_path")
_KNOWN_OPTIONS = ("thr", "m", "normalize", "flow_k", "depth_clip")


def load_manifest(path) -> Manifest:
    """Load and validate a manifest; paths are resolved relative to it."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise InputError(f"{path}: manifest must be a JSON object")
    task = raw.get("task")
    if task not in ("depth", "flow"):
        raise InputError(f"{path}: field 'task' must be 'depth' or 'flow', got {task!r}")
    entries_raw = raw.get("entries")
    if not isinstance(entries_raw, list) or not entries_raw:
        raise InputError(f"{path}: field 'entries' must be a non-empty list")
    base = os.path.dirname(os.path.abspath(path))
    entries = []
    for i, entry in enumerate(entries_raw):
        if not isinstance(entry, dict):
            raise InputError(f"{path}: entry {i} must be an object")
        resolved = {}
        for field_name in _ENTRY_FIELDS:
            value = entry.get(field_name)
            if not isinstance(value, str) or not value:
                raise InputError(
                    f"{path}: entry {i}: field '{field_name}' must be a non-empty string"
                )
            resolved[field_name] = os.path.join(base, value)
        mask = entry.get("mask_path")
        if mask is not None:
            if not isinstance(mask, str) or not mask:
                raise InputError(
                    f"{path}: entry {i}: field 'mask_path' must be a non-empty string"
                )
            mask = os.path.join(base, mask)
        entries.append(ManifestEntry(mask_path=mask, **resolved))
    options = raw.get("options", {})
    if not isinstance(options, dict):
        raise InputError(f"{path}: field 'options' must be an object")
    for key in options:
        if key not in _KNOWN_OPTIONS:
            raise InputError(
                f"{path}: unknown option {key!r} (known: {', '.join(_KNOWN_OPTIONS)})"
            )
    return Manifest(task, tuple(entries), dict(options))


# ---------------------------------------------------------------------------
# exports


def export_curves_csv(result, path):
    """Write a sparsification result as fraction,predicted,oracle rows."""
    lines = ["fraction,predicted,oracle"]
    for f, p, o in zip(result.fractions, result.predicted_curve, result.oracle_curve):
        lines.append(f"{format_float(f)},{format_float(p)},{format_float(o)}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if np.isfinite(v) else None
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    return value


def export_report_json(report: dict, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(report), fh, indent=2)
        fh.write("\n")
