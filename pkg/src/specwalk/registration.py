"""Discrete deformable registration on displacement-label grids.

Labels index a fixed grid of displacement vectors. Priors come from patch
intensity differences between the fixed image and the shifted moving image;
the random walker regularizes them, and the probabilistic result is reduced
to a displacement field by taking the expected displacement per voxel.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .adaptive import AdaptivePolicy, select_m
from .aggregation import (Aggregation, CoarsenVariant, aggregate_priors,
                          build_aggregation, coarsen_basis, propagate)
from .errors import DimsMismatch, InvalidParam
from .fastrw import solve_fast
from .graphs import (LaplacianMode, SeedPartition, build_graph, laplacian)
from .images import Image, LabelMap, ProbabilityField
from .indexing import num_voxels, unflatten
from .solver import LabelProblem, solve_basic


@dataclass(frozen=True)
class DisplacementGrid:
    """Odd-extent grid of displacement vectors, label 0 at the most
    negative corner, row-major with the x offset fastest."""

    extents: tuple[int, ...]
    step: int = 1

    def __post_init__(self):
        extents = tuple(int(e) for e in self.extents)
        if any(e < 1 or e % 2 == 0 for e in extents):
            raise InvalidParam("grid extents must be odd and positive")
        if self.step < 1:
            raise InvalidParam("grid step must be >= 1")
        object.__setattr__(self, "extents", extents)

    @property
    def K(self) -> int:
        return num_voxels(self.extents)

    def vectors(self) -> np.ndarray:
        """(K, d) table of displacement vectors in voxels."""
        half = [(e - 1) // 2 for e in self.extents]
        offsets = unflatten(np.arange(self.K), self.extents)
        return (offsets - np.asarray(half)) * self.step

    def zero_label(self) -> int:
        vec = self.vectors()
        return int(np.flatnonzero((vec == 0).all(axis=1))[0])


@dataclass(frozen=True)
class DisplacementField:
    """Per-voxel real displacement in voxel units."""

    dims: tuple[int, ...]
    vectors: np.ndarray              # (N, d)

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2 or v.shape != (num_voxels(self.dims), len(self.dims)):
            raise InvalidParam("field must be (N, d)")
        if not np.all(np.isfinite(v)):
            raise InvalidParam("field must be finite")
        object.__setattr__(self, "vectors", v)


@dataclass
class RegisterReport:
    m_use: int | None = None
    n_super: int | None = None
    priors_s: float = 0.0
    solve_s: float = 0.0
    aggregate_s: float = 0.0
    adaptive_saturated: bool = False
    method: str = "basic"


def _shift_clamped(grid_vals: np.ndarray, offset) -> np.ndarray:
    """Sample grid at (x + offset) with indices clamped to the edge."""
    out = grid_vals
    for axis, off in enumerate(offset):
        idx = np.clip(np.arange(grid_vals.shape[axis]) + int(off),
                      0, grid_vals.shape[axis] - 1)
        out = np.take(out, idx, axis=axis)
    return out


def similarity_priors(fixed: Image, moving: Image, grid: DisplacementGrid,
                      patch_radius: int = 2) -> ProbabilityField:
    """Patch-difference priors, one probability column per grid label.

    s_k(x) averages |fixed - moving shifted by d_k| over the patch around x
    (edge-clamped); priors are exp(-s^2 / sigma^2) normalized per voxel.
    sigma is the mean over voxels of the best (smallest) patch difference,
    i.e. the matching noise scale, so mismatched labels are suppressed
    decisively; identical images degenerate to argmax-sharp priors.
    """
    if fixed.dims != moving.dims:
        raise DimsMismatch("fixed and moving dims differ")
    if patch_radius < 0:
        raise InvalidParam("patch_radius must be >= 0")
    dims = fixed.dims
    d = len(dims)
    f_grid = fixed.intensities.reshape(dims, order="F")
    m_grid = moving.intensities.reshape(dims, order="F")
    offsets = np.stack(np.meshgrid(
        *([np.arange(-patch_radius, patch_radius + 1)] * d),
        indexing="ij"), axis=-1).reshape(-1, d)
    vectors = grid.vectors()
    scores = np.empty((num_voxels(dims), grid.K))
    for k, disp in enumerate(vectors):
        acc = np.zeros(dims)
        for off in offsets:
            acc += np.abs(_shift_clamped(f_grid, off)
                          - _shift_clamped(m_grid, off + disp))
        scores[:, k] = (acc / len(offsets)).reshape(-1, order="F")
    sigma = max(scores.min(axis=1).mean(), 1e-8)
    logits = -((scores / sigma) ** 2)
    logits -= logits.max(axis=1, keepdims=True)
    values = np.exp(logits)
    values /= values.sum(axis=1, keepdims=True)
    return ProbabilityField(dims, values)


def expected_displacement(u: ProbabilityField, grid: DisplacementGrid) -> DisplacementField:
    """Probability-weighted mean displacement per voxel."""
    if u.K != grid.K:
        raise DimsMismatch("probability columns do not match grid labels")
    return DisplacementField(u.dims, u.values @ grid.vectors().astype(np.float64))


def warp_labels(labels: LabelMap, fieldv: DisplacementField) -> LabelMap:
    """Nearest-neighbor pullback: out(x) = labels(round(x + field(x)))."""
    if labels.dims != fieldv.dims:
        raise DimsMismatch("labels and field dims differ")
    dims = labels.dims
    coords = unflatten(np.arange(num_voxels(dims)), dims)
    sample = np.rint(coords + fieldv.vectors).astype(np.int64)
    for axis, n in enumerate(dims):
        np.clip(sample[:, axis], 0, n - 1, out=sample[:, axis])
    strides = np.cumprod([1, *dims[:-1]])
    flat = (sample * strides).sum(axis=1)
    return LabelMap(dims, labels.labels[flat])


def register(fixed: Image, moving: Image, pack=None,
             grid: DisplacementGrid | None = None, gamma: float = 1.0,
             patch_radius: int = 2, adaptive: bool = False,
             aggregate: tuple[float, int] | None = None,
             m_use: int | None = None,
             coarsen_variant: CoarsenVariant = CoarsenVariant.DELTA,
             landmarks: SeedPartition | None = None,
             policy: AdaptivePolicy | None = None, beta: float = 50.0,
             ) -> tuple[ProbabilityField, DisplacementField, RegisterReport]:
    """Full pipeline: priors, optional aggregation, solve, expected field.

    With a pack the online solve runs on the precomputed eigenvectors (built
    from the fixed image); without one the basic solver is used. ``aggregate``
    is (similarity_tol, radius) and routes the solve through super-vertices.
    """
    if grid is None:
        grid = DisplacementGrid((7,) * len(fixed.dims))
    report = RegisterReport()
    t0 = time.perf_counter()
    priors = similarity_priors(fixed, moving, grid, patch_radius)
    report.priors_s = time.perf_counter() - t0
    n = fixed.n_voxels
    seeds = landmarks if landmarks is not None else SeedPartition(n, [], [])
    prob = LabelProblem(num_labels=grid.K, seeds=seeds, priors=priors.values,
                        gamma=gamma, laplacian_mode=LaplacianMode.NORMALIZED)
    if policy is not None:
        policy = replace(policy, grid_extents=grid.extents)
    else:
        policy = AdaptivePolicy(grid_extents=grid.extents)

    t0 = time.perf_counter()
    if pack is None:
        lap = laplacian(build_graph(fixed, beta=beta), LaplacianMode.NORMALIZED)
        u = solve_basic(lap, prob, dims=fixed.dims)
        report.method = "basic"
    elif aggregate is not None:
        similarity_tol, radius = aggregate
        t_agg = time.perf_counter()
        agg = build_aggregation(priors, max_cluster_radius=radius,
                                similarity_tol=similarity_tol)
        graph = build_graph(fixed, beta=pack.beta)
        _, pack_bar = coarsen_basis(pack, agg, graph, coarsen_variant,
                                    m_use=m_use)
        report.aggregate_s = time.perf_counter() - t_agg
        report.n_super = agg.n_super
        p_bar = aggregate_priors(priors.values, agg)
        p_bar /= p_bar.sum(axis=1, keepdims=True)
        if agg.n_super == 1:
            u = propagate(p_bar, agg)   # a single vertex has nothing to smooth
            report.m_use = pack_bar.m
        else:
            prob_bar = LabelProblem(
                num_labels=grid.K, seeds=_lift_seeds(seeds, agg),
                priors=p_bar, gamma=gamma,
                laplacian_mode=LaplacianMode.NORMALIZED)
            mb = pack_bar.m
            if adaptive:
                mb, info = select_m(pack_bar, prob_bar, policy)
                report.adaptive_saturated = info["saturated"]
            u_bar = solve_fast(pack_bar, pack_bar.laplacian, prob_bar, m_use=mb)
            report.m_use = mb
            u = propagate(u_bar.values, agg)
        report.method = f"aggregate-{coarsen_variant.value}"
    else:
        lap = laplacian(build_graph(fixed, beta=pack.beta),
                        LaplacianMode.NORMALIZED)
        chosen = m_use if m_use is not None else pack.m
        if adaptive:
            chosen, info = select_m(pack, prob, policy)
            report.adaptive_saturated = info["saturated"]
        u = solve_fast(pack, lap, prob, m_use=chosen)
        report.m_use = chosen
        report.method = "fast"
    report.solve_s = time.perf_counter() - t0

    fieldv = expected_displacement(u, grid)
    return u, fieldv, report


def _lift_seeds(seeds: SeedPartition, agg: Aggregation) -> SeedPartition:
    """Map landmark voxels to their super-vertices."""
    if seeds.n_seeds == 0:
        return SeedPartition(agg.n_super, [], [])
    super_ids = agg.cluster_ids[seeds.seed_indices]
    uniq, first = np.unique(super_ids, return_index=True)
    labels = seeds.seed_labels[first]
    clash = {}
    for sid, lab in zip(super_ids, seeds.seed_labels):
        if clash.setdefault(sid, lab) != lab:
            raise InvalidParam(
                "conflicting landmark labels inside one super-vertex")
    return SeedPartition(agg.n_super, uniq, labels)
