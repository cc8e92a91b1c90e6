"""Super-vertex aggregation and eigenvector coarsening.

Voxels are grouped online by prior similarity and spatial proximity
(greedy region growing, deterministic scan order). Precomputed eigenvectors
are pushed onto the super-vertices either naively (cluster means) or with
delta weighting, which discounts voxels whose edges were all consumed inside
a cluster; the coarsened columns are re-orthonormalized and re-valued by
their cut values on the aggregate graph.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp

from .errors import DimsMismatch, EmptyBasis, InvalidParam
from .graphs import (Laplacian, LaplacianMode, WeightedLatticeGraph,
                     lattice_edges, laplacian_from_weights)
from .images import ProbabilityField, write_rawj
from .indexing import num_voxels, unflatten
from .linalg import EigenBasis, gram_schmidt


class CoarsenVariant(Enum):
    NAIVE = "naive"
    DELTA = "delta"


@dataclass(frozen=True)
class Aggregation:
    """Hard assignment of voxels to super-vertices."""

    dims: tuple[int, ...]
    cluster_ids: np.ndarray          # (N,) int
    n_super: int

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.cluster_ids, minlength=self.n_super)

    def eta(self) -> sp.csr_matrix:
        """N x N-bar projection: row x is one-hot at its cluster."""
        n = self.cluster_ids.size
        return sp.csr_matrix(
            (np.ones(n), (np.arange(n), self.cluster_ids)),
            shape=(n, self.n_super))

    def eta_bar(self) -> sp.csr_matrix:
        """N x N-bar aggregation: columns sum to one."""
        n = self.cluster_ids.size
        weights = 1.0 / self.sizes[self.cluster_ids]
        return sp.csr_matrix(
            (weights, (np.arange(n), self.cluster_ids)),
            shape=(n, self.n_super))


@dataclass(frozen=True)
class CoarseBasis:
    """Orthonormalized coarsened eigenvectors with aggregate cut values."""

    q_bar: np.ndarray                # (N-bar, m')
    lambda_bar: np.ndarray           # (m',) ascending
    delta: np.ndarray | None         # cached voxel weights (DELTA variant)
    variant: CoarsenVariant

    @property
    def m(self) -> int:
        return self.lambda_bar.size


@dataclass(frozen=True)
class CoarsePack:
    """Spectral model of an aggregate graph, consumable by solve_fast."""

    dims: tuple[int, ...]
    eigen: EigenBasis
    d_sqrt: np.ndarray
    laplacian: Laplacian | None

    @property
    def m(self) -> int:
        return self.eigen.m


def build_aggregation(priors: ProbabilityField, max_cluster_radius: int,
                      similarity_tol: float) -> Aggregation:
    """Greedy region growing over the lattice in flat index order.

    An unassigned voxel seeds a cluster; lattice neighbors join while they
    stay within the Chebyshev radius of the seed voxel and their prior row
    is within similarity_tol (L1) of the seed's row.
    """
    dims = priors.dims
    n = num_voxels(dims)
    p = priors.values
    coords = unflatten(np.arange(n), dims)
    strides = np.cumprod([1, *dims[:-1]])
    cluster = np.full(n, -1, dtype=np.int64)
    next_id = 0
    for start in range(n):
        if cluster[start] >= 0:
            continue
        cluster[start] = next_id
        p_seed = p[start]
        c_seed = coords[start]
        queue = deque([start])
        while queue:
            x = queue.popleft()
            cx = coords[x]
            for axis in range(len(dims)):
                for step in (-1, 1):
                    if not 0 <= cx[axis] + step < dims[axis]:
                        continue
                    y = x + step * strides[axis]
                    if cluster[y] >= 0:
                        continue
                    if np.abs(coords[y] - c_seed).max() > max_cluster_radius:
                        continue
                    if np.abs(p[y] - p_seed).sum() > similarity_tol:
                        continue
                    cluster[y] = next_id
                    queue.append(y)
        next_id += 1
    return Aggregation(dims=dims, cluster_ids=cluster, n_super=next_id)


def delta_weights(agg: Aggregation, graph: WeightedLatticeGraph) -> np.ndarray:
    """Local variation of the projection: 2 per neighbor in another cluster."""
    if agg.dims != graph.dims:
        raise DimsMismatch("aggregation and graph dims differ")
    heads, tails = lattice_edges(agg.dims)
    differs = agg.cluster_ids[heads] != agg.cluster_ids[tails]
    delta = np.zeros(num_voxels(agg.dims))
    np.add.at(delta, heads[differs], 2.0)
    np.add.at(delta, tails[differs], 2.0)
    return delta


def aggregate_weights(agg: Aggregation, graph: WeightedLatticeGraph) -> sp.csr_matrix:
    """Super-vertex weights: sums of original weights on crossing edges."""
    w = graph.weights.tocoo()
    ci, cj = agg.cluster_ids[w.row], agg.cluster_ids[w.col]
    crossing = ci != cj
    mat = sp.coo_matrix((w.data[crossing], (ci[crossing], cj[crossing])),
                        shape=(agg.n_super, agg.n_super)).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def coarsen_basis(pack, agg: Aggregation, graph: WeightedLatticeGraph,
                  variant: CoarsenVariant = CoarsenVariant.DELTA,
                  m_use: int | None = None) -> tuple[CoarseBasis, CoarsePack]:
    """Push pack columns onto super-vertices; orthonormalize; re-value.

    Returns the CoarseBasis plus a CoarsePack ready for the online solve on
    the aggregate graph.
    """
    if agg.dims != tuple(pack.dims):
        raise DimsMismatch("aggregation and pack dims differ")
    vectors = np.asarray(pack.eigen.vectors, dtype=np.float64)
    if m_use is not None:
        vectors = vectors[:, :m_use]
    delta = None
    weights = None
    if variant is CoarsenVariant.DELTA:
        delta = delta_weights(agg, graph)
        weights = delta
    eta_bar_t = agg.eta_bar().T.tocsr()
    weighted = vectors if weights is None else vectors * weights[:, None]
    raw = eta_bar_t @ weighted                       # (N-bar, m)

    if agg.n_super == 1:
        q_bar = np.ones((1, 1))
        lam = np.zeros(1)
        d_sqrt_bar = np.ones(1)
        basis = CoarseBasis(q_bar=q_bar, lambda_bar=lam, delta=delta,
                            variant=variant)
        pack_bar = CoarsePack(dims=(1,), eigen=EigenBasis(q_bar, lam),
                              d_sqrt=d_sqrt_bar, laplacian=None)
        return basis, pack_bar

    q_bar = gram_schmidt(raw)
    if q_bar.shape[1] == 0:
        raise EmptyBasis("all coarsened columns collapsed to zero")
    w_bar = aggregate_weights(agg, graph)
    lap_bar = laplacian_from_weights(w_bar, LaplacianMode.NORMALIZED)
    quad = np.einsum("ij,ij->j", q_bar, lap_bar.matrix @ q_bar)
    lam = np.maximum(quad, 0.0)                      # columns are unit norm
    order = np.argsort(lam, kind="stable")
    q_bar = q_bar[:, order]
    lam = lam[order]
    basis = CoarseBasis(q_bar=q_bar, lambda_bar=lam, delta=delta,
                        variant=variant)
    pack_bar = CoarsePack(dims=(agg.n_super,), eigen=EigenBasis(q_bar, lam),
                          d_sqrt=lap_bar.d_sqrt, laplacian=lap_bar)
    return basis, pack_bar


def aggregate_priors(priors: np.ndarray, agg: Aggregation) -> np.ndarray:
    """Mean prior row per super-vertex (rows stay stochastic)."""
    return agg.eta_bar().T @ priors


def propagate(u_bar: np.ndarray, agg: Aggregation) -> ProbabilityField:
    """Copy each cluster's probability row back to its member voxels."""
    u_bar = np.asarray(u_bar, dtype=np.float64)
    if u_bar.shape[0] != agg.n_super:
        raise DimsMismatch("row count does not match the super-vertex count")
    if not np.allclose(u_bar.sum(axis=1), 1.0, atol=1e-6):
        raise InvalidParam("aggregate rows must sum to 1 within 1e-6")
    return ProbabilityField(agg.dims, u_bar[agg.cluster_ids])


def save_aggregation(agg: Aggregation, path):
    """Cluster-id map as RAWJ u32 for UI display."""
    return write_rawj(path, agg.cluster_ids.astype("<u4"), agg.dims, "u32")
