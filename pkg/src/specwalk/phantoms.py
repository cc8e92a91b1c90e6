"""Deterministic synthetic phantoms for tests and benchmarks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InvalidParam
from .images import Image, LabelMap
from .indexing import num_voxels
from .registration import DisplacementField


@dataclass(frozen=True)
class Phantom:
    image: Image
    labels: LabelMap
    generator: str
    rng_seed: int
    field: DisplacementField | None = None
    moving: Image | None = None       # second image of a shifted pair
    moving_labels: LabelMap | None = None


def _smooth_region_labels(dims, k: int, rng: np.random.Generator,
                          min_region: int) -> np.ndarray:
    """Argmax of K smoothed noise fields; retried until regions are big."""
    sigma = max(min(dims) / 6.0, 1.5)
    for _ in range(64):
        fields = [ndimage.gaussian_filter(rng.standard_normal(dims), sigma)
                  for _ in range(k)]
        labels = np.argmax(np.stack(fields, axis=-1), axis=-1)
        counts = np.bincount(labels.ravel(), minlength=k)
        if counts.min() >= min_region:
            return labels
    raise InvalidParam(f"could not place {k} regions of >= {min_region} voxels")


def _blobs(dims, k: int, rng: np.random.Generator, noise_sigma: float,
           min_region: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    if min_region is None:
        min_region = max(1, min(12, num_voxels(dims) // (4 * k)))
    labels = _smooth_region_labels(dims, k, rng, min_region)
    levels = (np.arange(k) + 0.5) / k
    img = levels[labels]
    if noise_sigma > 0:
        img = img + rng.normal(0.0, noise_sigma, size=labels.shape)
    return np.clip(img, 0.0, 1.0), labels


def _cells(dims, rng: np.random.Generator,
           noise_sigma: float) -> tuple[np.ndarray, np.ndarray]:
    if len(dims) != 2:
        raise InvalidParam("cells2d needs 2D dims")
    nx, ny = dims
    r = max(2, min(nx, ny) // 10)
    labels = np.zeros(dims, dtype=np.int64)
    xs, ys = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    centers = []
    for _ in range(200):
        cx, cy = rng.integers(r, nx - r), rng.integers(r, ny - r)
        if all((cx - px) ** 2 + (cy - py) ** 2 >= (2 * r + 2) ** 2
               for px, py in centers):
            centers.append((cx, cy))
        if len(centers) >= max(3, (nx * ny) // (20 * r * r)):
            break
    for cx, cy in centers:
        labels[(xs - cx) ** 2 + (ys - cy) ** 2 <= r * r] = 1
    img = np.where(labels == 1, 0.8, 0.2)
    if noise_sigma > 0:
        img = img + rng.normal(0.0, noise_sigma, size=dims)
    return np.clip(img, 0.0, 1.0), labels


def _shift_grid(grid_vals: np.ndarray, shift) -> np.ndarray:
    """Content moved by +shift, edges clamped."""
    out = grid_vals
    for axis, s in enumerate(shift):
        idx = np.clip(np.arange(grid_vals.shape[axis]) - int(s),
                      0, grid_vals.shape[axis] - 1)
        out = np.take(out, idx, axis=axis)
    return out


def _texture(dims, rng: np.random.Generator, amplitude: float) -> np.ndarray:
    """Smooth random texture so patches are discriminative everywhere."""
    t = ndimage.gaussian_filter(rng.standard_normal(dims), 1.5)
    return amplitude * t / max(t.std(), 1e-12)


def make_phantom(kind: str, dims, rng_seed: int = 0,
                 noise_sigma: float = 0.02, num_regions: int = 3,
                 shift=None, texture_amp: float = 0.15) -> Phantom:
    """Deterministic phantom generator.

    kinds: blobs2d / blobs3d (num_regions smooth regions), cells2d (disjoint
    circles of one foreground class), shifted_pair (blobs image plus a copy
    shifted by ``shift`` with independent noise; ground-truth field attached).
    shifted_pair bases carry smooth texture (``texture_amp``) so that patch
    matching is informative away from region boundaries.
    """
    dims = tuple(int(n) for n in dims)
    rng = np.random.default_rng(rng_seed)
    if kind in ("blobs2d", "blobs3d"):
        want = 2 if kind == "blobs2d" else 3
        if len(dims) != want:
            raise InvalidParam(f"{kind} needs {want}D dims")
        img, labels = _blobs(dims, num_regions, rng, noise_sigma)
        return Phantom(
            image=Image(dims, img.reshape(-1, order="F")),
            labels=LabelMap(dims, labels.reshape(-1, order="F")),
            generator=kind, rng_seed=rng_seed)
    if kind == "cells2d":
        img, labels = _cells(dims, rng, noise_sigma)
        return Phantom(
            image=Image(dims, img.reshape(-1, order="F")),
            labels=LabelMap(dims, labels.reshape(-1, order="F")),
            generator=kind, rng_seed=rng_seed)
    if kind == "shifted_pair":
        if shift is None:
            shift = (2,) + (0,) * (len(dims) - 1)
        if len(shift) != len(dims):
            raise InvalidParam("shift length must match dims")
        base, labels = _blobs(dims, num_regions, rng, 0.0)
        base = np.clip(base + _texture(dims, rng, texture_amp), 0.0, 1.0)
        fixed = np.clip(base + rng.normal(0.0, noise_sigma, dims), 0, 1)
        moved = _shift_grid(base, shift)
        moving = np.clip(moved + rng.normal(0.0, noise_sigma, dims), 0, 1)
        moved_labels = _shift_grid(labels, shift)
        n = num_voxels(dims)
        gt = np.tile(np.asarray(shift, dtype=np.float64), (n, 1))
        return Phantom(
            image=Image(dims, fixed.reshape(-1, order="F")),
            labels=LabelMap(dims, labels.reshape(-1, order="F")),
            generator=kind, rng_seed=rng_seed,
            field=DisplacementField(dims, gt),
            moving=Image(dims, moving.reshape(-1, order="F")),
            moving_labels=LabelMap(dims, moved_labels.reshape(-1, order="F")))
    raise InvalidParam(f"unknown phantom kind {kind!r}")


def interior_mask(dims, margin: int) -> np.ndarray:
    """Flat boolean mask of voxels at least ``margin`` from every border."""
    grids = np.meshgrid(*[np.arange(n) for n in dims], indexing="ij")
    mask = np.ones(dims, dtype=bool)
    for g, n in zip(grids, dims):
        mask &= (g >= margin) & (g < n - margin)
    return mask.reshape(-1, order="F")
