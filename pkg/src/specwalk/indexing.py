"""Flat voxel indexing shared by every module.

Voxels are addressed by a single flat index in row-major order with x
fastest: for dims (nx, ny) the voxel (x, y) has index x + nx * y, and for
dims (nx, ny, nz) index x + nx * (y + ny * z).
"""

from __future__ import annotations

import numpy as np


def num_voxels(dims) -> int:
    return int(np.prod(dims))


def flat_index(coords: np.ndarray, dims) -> np.ndarray:
    """Flat index for integer coordinates of shape (..., d)."""
    coords = np.asarray(coords)
    strides = np.cumprod([1, *dims[:-1]])
    return (coords * strides).sum(axis=-1)


def unflatten(index: np.ndarray, dims) -> np.ndarray:
    """Integer coordinates (..., d) for flat indices."""
    index = np.asarray(index)
    out = np.empty(index.shape + (len(dims),), dtype=np.int64)
    rem = index
    for axis, n in enumerate(dims):
        out[..., axis] = rem % n
        rem = rem // n
    return out


def coordinate_grids(dims) -> list[np.ndarray]:
    """Per-axis coordinate arrays of shape dims, indexed ij with x first."""
    axes = [np.arange(n) for n in dims]
    return list(np.meshgrid(*axes, indexing="ij"))


def as_grid(flat: np.ndarray, dims) -> np.ndarray:
    """Reshape a flat x-fastest array to shape dims (Fortran order)."""
    flat = np.asarray(flat)
    return flat.reshape(tuple(dims), order="F")


def as_flat(grid: np.ndarray) -> np.ndarray:
    """Inverse of as_grid."""
    return np.asarray(grid).reshape(-1, order="F")
