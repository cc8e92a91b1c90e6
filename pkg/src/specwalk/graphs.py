"""Weighted image graphs, Laplacians, and the seed block partition.

Edges connect 4-neighbors (2D) or 6-neighbors (3D). Edge weights follow
exp(-beta * |dI|) on the normalized intensities, floored at W_MIN so the
graph stays connected and every degree is positive.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateGraph, InvalidParam
from .images import Image
from .indexing import num_voxels

W_MIN = 1e-8


class LaplacianMode(Enum):
    UNNORMALIZED = "unnormalized"
    NORMALIZED = "normalized"


@dataclass(frozen=True)
class WeightedLatticeGraph:
    dims: tuple[int, ...]
    beta: float
    weights: sp.csr_matrix           # symmetric, zero diagonal
    degrees: np.ndarray              # (N,) row sums of weights

    @property
    def n_vertices(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class Laplacian:
    mode: LaplacianMode
    matrix: sp.csr_matrix
    d_sqrt: np.ndarray | None = None  # only in NORMALIZED mode

    @property
    def n_vertices(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class SeedPartition:
    """Seeded voxels and the seed-first reordering of all voxels."""

    n_vertices: int
    seed_indices: np.ndarray         # (S,) sorted ascending, unique
    seed_labels: np.ndarray          # (S,) label per seed

    def __post_init__(self):
        idx = np.asarray(self.seed_indices, dtype=np.int64).ravel()
        lab = np.asarray(self.seed_labels, dtype=np.int64).ravel()
        if idx.size != lab.size:
            raise InvalidParam("seed_indices and seed_labels must have equal length")
        if idx.size:
            order = np.argsort(idx, kind="stable")
            idx, lab = idx[order], lab[order]
            if idx[0] < 0 or idx[-1] >= self.n_vertices:
                raise IndexError(f"seed index out of range 0..{self.n_vertices - 1}")
            if np.any(np.diff(idx) == 0):
                raise InvalidParam("seed indices must be unique")
            if lab.min() < 0:
                raise InvalidParam("seed labels must be non-negative")
        object.__setattr__(self, "seed_indices", idx)
        object.__setattr__(self, "seed_labels", lab)

    @property
    def n_seeds(self) -> int:
        return self.seed_indices.size

    @property
    def num_labels(self) -> int:
        return int(self.seed_labels.max()) + 1 if self.n_seeds else 0

    def nonseed_indices(self) -> np.ndarray:
        mask = np.ones(self.n_vertices, dtype=bool)
        mask[self.seed_indices] = False
        return np.flatnonzero(mask)

    def permutation(self) -> np.ndarray:
        """Original index of each row in [seeded | non-seeded] order."""
        return np.concatenate([self.seed_indices, self.nonseed_indices()])

    def one_hot(self, num_labels: int | None = None) -> np.ndarray:
        """S x K one-hot matrix of the seed labels."""
        k = num_labels if num_labels is not None else self.num_labels
        u_s = np.zeros((self.n_seeds, k))
        u_s[np.arange(self.n_seeds), self.seed_labels] = 1.0
        return u_s


def lattice_edges(dims) -> tuple[np.ndarray, np.ndarray]:
    """Pairs (i, j) of flat indices of all axis-aligned neighbor edges."""
    dims = tuple(int(n) for n in dims)
    grid = np.arange(num_voxels(dims), dtype=np.int64).reshape(dims, order="F")
    heads, tails = [], []
    for axis in range(len(dims)):
        lo = [slice(None)] * len(dims)
        hi = [slice(None)] * len(dims)
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        heads.append(grid[tuple(lo)].ravel(order="F"))
        tails.append(grid[tuple(hi)].ravel(order="F"))
    return np.concatenate(heads), np.concatenate(tails)


def weights_from_edges(n: int, heads: np.ndarray, tails: np.ndarray,
                       w: np.ndarray) -> sp.csr_matrix:
    """Symmetric weight matrix from one direction of each edge."""
    mat = sp.coo_matrix(
        (np.concatenate([w, w]),
         (np.concatenate([heads, tails]), np.concatenate([tails, heads]))),
        shape=(n, n)).tocsr()
    mat.sort_indices()
    return mat


def build_graph(image: Image, beta: float,
                neighborhood: str = "lattice") -> WeightedLatticeGraph:
    """Weighted lattice graph with w = max(exp(-beta |dI|), W_MIN)."""
    if beta < 0:
        raise InvalidParam(f"beta must be >= 0, got {beta}")
    if neighborhood != "lattice":
        raise InvalidParam("only the 4/6-connected lattice neighborhood is supported")
    heads, tails = lattice_edges(image.dims)
    diff = np.abs(image.intensities[heads] - image.intensities[tails])
    w = np.maximum(np.exp(-beta * diff), W_MIN)
    weights = weights_from_edges(image.n_voxels, heads, tails, w)
    degrees = np.asarray(weights.sum(axis=1)).ravel()
    return WeightedLatticeGraph(dims=image.dims, beta=float(beta),
                                weights=weights, degrees=degrees)


def laplacian_from_weights(weights: sp.spmatrix, mode: LaplacianMode) -> Laplacian:
    """Laplacian of an arbitrary symmetric non-negative weight matrix."""
    weights = weights.tocsr()
    degrees = np.asarray(weights.sum(axis=1)).ravel()
    if np.any(degrees <= 0):
        raise DegenerateGraph("graph has an isolated vertex (zero degree)")
    lap = sp.diags(degrees) - weights
    if mode is LaplacianMode.UNNORMALIZED:
        mat = lap.tocsr()
        mat.sort_indices()
        return Laplacian(mode=mode, matrix=mat)
    d_sqrt = np.sqrt(degrees)
    inv = sp.diags(1.0 / d_sqrt)
    mat = (inv @ lap @ inv).tocsr()
    mat = ((mat + mat.T) * 0.5).tocsr()   # exact symmetry, not just to rounding
    mat.sort_indices()
    return Laplacian(mode=mode, matrix=mat, d_sqrt=d_sqrt)


def laplacian(graph: WeightedLatticeGraph, mode: LaplacianMode) -> Laplacian:
    return laplacian_from_weights(graph.weights, mode)


def partition_blocks(lap: Laplacian, seeds: SeedPartition):
    """Blocks (L_s, B, L_n) of the Laplacian under the seed-first order."""
    n = lap.n_vertices
    if seeds.n_vertices != n:
        raise InvalidParam("seed partition built for a different vertex count")
    s_idx = seeds.seed_indices
    n_idx = seeds.nonseed_indices()
    mat = lap.matrix.tocsc()
    seeded_cols = mat[:, s_idx].tocsr()
    nonseed_cols = mat[:, n_idx].tocsr()
    l_s = seeded_cols[s_idx, :].tocsr()
    b = nonseed_cols[s_idx, :].tocsr()
    l_n = nonseed_cols[n_idx, :].tocsr()
    for block in (l_s, b, l_n):
        block.sort_indices()
    return l_s, b, l_n
