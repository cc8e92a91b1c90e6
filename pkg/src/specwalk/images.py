"""Images, label maps, and probability fields, plus their file formats.

Two formats are supported: 8-bit binary PGM (P5) for 2D grayscale input,
and RAWJ, a JSON header (`<name>.json`) next to a little-endian raw payload
(`<name>.raw`). Intensities are normalized to [0, 1] at load time so that
edge-weight parameters mean the same thing for 8-bit and float inputs.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimsMismatch, FormatError, InvalidParam, IoError
from .indexing import num_voxels

SENTINEL_UNLABELED = 65535

_RAWJ_DTYPES = {"f32": "<f4", "u16": "<u2", "u32": "<u4"}


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Image:
    """Scalar intensity grid (2D or 3D), flat x-fastest storage."""

    dims: tuple[int, ...]
    intensities: np.ndarray           # (N,) float64 in [0, 1]
    spacing: tuple[float, ...] = ()
    intensity_range: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        if len(dims) not in (2, 3) or any(n <= 0 for n in dims):
            raise InvalidParam(f"dims must be 2 or 3 positive extents, got {dims}")
        spacing = tuple(float(s) for s in self.spacing) if self.spacing else (1.0,) * len(dims)
        if len(spacing) != len(dims):
            raise InvalidParam("spacing length must match dims")
        vals = np.asarray(self.intensities, dtype=np.float64).ravel()
        if vals.size != num_voxels(dims):
            raise InvalidParam(f"expected {num_voxels(dims)} intensities, got {vals.size}")
        if not np.all(np.isfinite(vals)):
            raise InvalidParam("intensities must be finite")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "intensities", _frozen(vals))

    @property
    def n_voxels(self) -> int:
        return self.intensities.size

    @property
    def ndim(self) -> int:
        return len(self.dims)

    def content_hash(self) -> bytes:
        """32-byte hash of dims, spacing and float32 intensities."""
        h = hashlib.sha256()
        h.update(struct.pack("<B", len(self.dims)))
        h.update(np.asarray(self.dims, dtype="<u8").tobytes())
        h.update(np.asarray(self.spacing, dtype="<f8").tobytes())
        h.update(self.intensities.astype("<f4").tobytes())
        return h.digest()


@dataclass(frozen=True)
class LabelMap:
    """Integer labels on the voxel grid; SENTINEL_UNLABELED marks no label."""

    dims: tuple[int, ...]
    labels: np.ndarray                # (N,) int32 / SENTINEL_UNLABELED

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        lab = np.asarray(self.labels).astype(np.int64, copy=False).ravel()
        if lab.size != num_voxels(dims):
            raise InvalidParam("label count does not match dims")
        valid = (lab >= 0) & ((lab < SENTINEL_UNLABELED) | (lab == SENTINEL_UNLABELED))
        if not valid.all():
            raise InvalidParam("labels must be non-negative")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "labels", _frozen(lab))

    def num_labels(self) -> int:
        real = self.labels[self.labels != SENTINEL_UNLABELED]
        return int(real.max()) + 1 if real.size else 0


@dataclass(frozen=True)
class ProbabilityField:
    """Row-stochastic N x K label probabilities."""

    dims: tuple[int, ...]
    values: np.ndarray                # (N, K) float64

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2 or vals.shape[0] != num_voxels(dims):
            raise InvalidParam(f"values must be (N, K) with N={num_voxels(dims)}")
        rows = vals.sum(axis=1)
        if not np.allclose(rows, 1.0, atol=1e-6):
            raise InvalidParam("rows must sum to 1 within 1e-6")
        if vals.min() < -1e-6 or vals.max() > 1 + 1e-6:
            raise InvalidParam("entries must lie in [-1e-6, 1+1e-6]")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "values", _frozen(vals))

    @property
    def K(self) -> int:
        return self.values.shape[1]

    def clamped(self) -> np.ndarray:
        """Values clipped to [0, 1] for export."""
        return np.clip(self.values, 0.0, 1.0)


def hard_labels(fieldp: ProbabilityField) -> LabelMap:
    """Per-voxel argmax with ties broken by the smallest label index."""
    return LabelMap(fieldp.dims, np.argmax(fieldp.values, axis=1))


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

def _rawj_paths(path: Path) -> tuple[Path, Path]:
    if path.suffix == ".json":
        return path, path.with_suffix(".raw")
    if path.suffix == ".raw":
        return path.with_suffix(".json"), path
    return path.with_suffix(path.suffix + ".json"), path.with_suffix(path.suffix + ".raw")


def write_rawj(path, array: np.ndarray, dims, dtype: str, *,
               spacing=None, channels: int | None = None) -> Path:
    """Write a flat x-fastest array as a RAWJ pair; returns the json path."""
    jpath, rpath = _rawj_paths(Path(path))
    header = {
        "dims": [int(n) for n in dims],
        "spacing": [float(s) for s in (spacing or [1.0] * len(dims))],
        "dtype": dtype,
        "order": "x-fastest",
    }
    if channels is not None:
        header["channels"] = int(channels)
    try:
        jpath.write_text(json.dumps(header))
        rpath.write_bytes(np.ascontiguousarray(array, dtype=_RAWJ_DTYPES[dtype]).tobytes())
    except OSError as exc:
        raise IoError(str(exc)) from exc
    return jpath


def read_rawj(path) -> tuple[dict, np.ndarray]:
    """Read a RAWJ pair; returns (header, flat array in the header dtype)."""
    jpath, rpath = _rawj_paths(Path(path))
    if not jpath.exists() or not rpath.exists():
        raise IoError(f"missing RAWJ pair for {path}")
    try:
        header = json.loads(jpath.read_text())
        raw = rpath.read_bytes()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"bad RAWJ header {jpath}: {exc}") from exc
    for key in ("dims", "dtype"):
        if key not in header:
            raise FormatError(f"RAWJ header missing '{key}'")
    dtype = header["dtype"]
    if dtype not in _RAWJ_DTYPES:
        raise FormatError(f"unsupported RAWJ dtype {dtype!r}")
    expected = num_voxels(header["dims"]) * int(header.get("channels", 1))
    values = np.frombuffer(raw, dtype=_RAWJ_DTYPES[dtype])
    if values.size != expected:
        raise FormatError(
            f"RAWJ payload has {values.size} values, header implies {expected}")
    return header, values


def _load_pgm(path: Path) -> Image:
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    # P5 header: magic, width, height, maxval, separated by whitespace/comments
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4 and pos < len(data):
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if len(tokens) < 4 or tokens[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM (P5) file")
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError as exc:
        raise FormatError(f"{path}: bad PGM header") from exc
    if not (0 < maxval < 256):
        raise FormatError(f"{path}: only 8-bit PGM supported (maxval={maxval})")
    pos += 1  # single whitespace after maxval
    pixels = np.frombuffer(data, dtype=np.uint8, offset=pos)
    if pixels.size != width * height:
        raise FormatError(
            f"{path}: payload has {pixels.size} pixels, header implies {width * height}")
    # PGM stores rows top to bottom, x fastest within a row: already flat x-fastest
    vals = pixels.astype(np.float64) / maxval
    return Image(dims=(width, height), intensities=vals,
                 intensity_range=(0.0, float(maxval)))


def load_image(path) -> Image:
    """Load a PGM (2D) or RAWJ image, normalizing intensities to [0, 1]."""
    path = Path(path)
    if not path.exists() and path.suffix not in (".json", ".raw"):
        # RAWJ callers may pass the bare stem
        if not _rawj_paths(path)[0].exists():
            raise IoError(f"no such file: {path}")
    if path.suffix == ".pgm":
        return _load_pgm(path)
    header, values = read_rawj(path)
    if header.get("channels", 1) != 1:
        raise FormatError("image RAWJ must be single channel")
    vals = values.astype(np.float64)
    lo, hi = float(vals.min()), float(vals.max())
    if hi > lo and (lo < 0.0 or hi > 1.0):
        vals = (vals - lo) / (hi - lo)
    else:
        vals = np.clip(vals, 0.0, 1.0)
    return Image(dims=tuple(header["dims"]), intensities=vals,
                 spacing=tuple(header.get("spacing", [])),
                 intensity_range=(lo, hi))


def save_image(image: Image, path) -> Path:
    """Save as RAWJ float32; round-trips bit-identically for RAWJ sources."""
    return write_rawj(path, image.intensities.astype("<f4"), image.dims, "f32",
                      spacing=image.spacing)


def save_labels(labels: LabelMap, path) -> Path:
    return write_rawj(path, labels.labels.astype("<u2"), labels.dims, "u16")


def load_labels(path) -> LabelMap:
    header, values = read_rawj(path)
    if header["dtype"] != "u16":
        raise FormatError("label maps use RAWJ dtype u16")
    return LabelMap(tuple(header["dims"]), values.astype(np.int64))


def save_probabilities(fieldp: ProbabilityField, path) -> Path:
    return write_rawj(path, fieldp.clamped().astype("<f4"), fieldp.dims, "f32",
                      channels=fieldp.K)


def load_probabilities(path) -> ProbabilityField:
    header, values = read_rawj(path)
    k = int(header.get("channels", 1))
    vals = values.astype(np.float64).reshape(-1, k)
    # renormalize quantization drift from the f32 round trip
    vals /= vals.sum(axis=1, keepdims=True)
    return ProbabilityField(tuple(header["dims"]), vals)
