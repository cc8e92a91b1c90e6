"""Basic (non-precomputed) random walker solver.

Solves (L_n + gamma I) U_n = gamma P_n - B^T U_s exactly with CG; the
ground-truth baseline every precomputed path is measured against. In
normalized mode the system is posed in the D^{1/2}-scaled variables and the
result mapped back, with rows renormalized to sum to one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InvalidParam, SingularSystem
from .graphs import Laplacian, LaplacianMode, SeedPartition, partition_blocks
from .images import ProbabilityField
from .linalg import CG_TOL, cg_solve


@dataclass(frozen=True)
class LabelProblem:
    """Online inputs of one solve: seeds, optional priors, gamma."""

    num_labels: int
    seeds: SeedPartition
    priors: np.ndarray | None = None          # (N, K) row-stochastic
    gamma: float = 0.0
    laplacian_mode: LaplacianMode = LaplacianMode.NORMALIZED

    def __post_init__(self):
        if self.gamma < 0:
            raise InvalidParam("gamma must be >= 0")
        if self.gamma == 0 and self.seeds.n_seeds == 0:
            raise SingularSystem("gamma = 0 with no seeds leaves the system singular")
        if self.priors is None:
            if self.gamma != 0:
                raise InvalidParam("gamma > 0 requires priors")
        else:
            p = np.asarray(self.priors, dtype=np.float64)
            if p.ndim != 2 or p.shape[1] != self.num_labels:
                raise InvalidParam("priors must be (N, K)")
            if not np.allclose(p.sum(axis=1), 1.0, atol=1e-6):
                raise InvalidParam("prior rows must sum to 1 within 1e-6")
            object.__setattr__(self, "priors", p)
        if self.seeds.n_seeds and self.seeds.seed_labels.max() >= self.num_labels:
            raise InvalidParam("seed label out of range")

    @property
    def K(self) -> int:
        return self.num_labels


def _finalize(u: np.ndarray, dims, seeds: SeedPartition, k: int) -> ProbabilityField:
    """Force exact one-hot seed rows, renormalize, clamp tiny excursions."""
    if seeds.n_seeds:
        u[seeds.seed_indices] = 0.0
        u[seeds.seed_indices, seeds.seed_labels] = 1.0
    u = np.clip(u, 0.0, None)
    sums = u.sum(axis=1, keepdims=True)
    dead = (sums == 0.0).ravel()
    if dead.any():
        u[dead] = 1.0 / k          # no information survived clamping
        sums[dead] = 1.0
    return ProbabilityField(dims, u / sums)


def solve_basic(lap: Laplacian, prob: LabelProblem, dims=None,
                tol: float = CG_TOL) -> ProbabilityField:
    """Exact random walker probabilities for every label."""
    n = lap.n_vertices
    k = prob.K
    seeds = prob.seeds
    if seeds.n_vertices != n:
        raise InvalidParam("seed partition does not match Laplacian size")
    if lap.mode is not prob.laplacian_mode:
        raise InvalidParam("problem and Laplacian disagree on the mode")
    if dims is None:
        dims = (n,)

    normalized = lap.mode is LaplacianMode.NORMALIZED
    d_sqrt = lap.d_sqrt if normalized else np.ones(n)

    s_idx = seeds.seed_indices
    n_idx = seeds.nonseed_indices()
    u = np.zeros((n, k))

    if n_idx.size == 0:
        return _finalize(u, dims, seeds, k)

    _, b, l_n = partition_blocks(lap, seeds)
    gamma = prob.gamma
    a = l_n + gamma * sp.identity(l_n.shape[0], format="csr")

    u_s_hat = seeds.one_hot(k) * d_sqrt[s_idx, None]
    rhs = np.zeros((n_idx.size, k))
    if gamma > 0:
        rhs += gamma * prob.priors[n_idx] * d_sqrt[n_idx, None]
    if seeds.n_seeds:
        rhs -= b.T @ u_s_hat

    if gamma == 0 and k >= 2:
        # solve K-1 systems; the row-sum identity fixes the last column
        u_n_hat = np.empty((n_idx.size, k))
        u_n_hat[:, :-1] = cg_solve(a, rhs[:, :-1], tol=tol)
        u_n_hat[:, -1] = d_sqrt[n_idx] - u_n_hat[:, :-1].sum(axis=1)
    else:
        u_n_hat = cg_solve(a, rhs, tol=tol)

    u[n_idx] = u_n_hat / d_sqrt[n_idx, None]
    return _finalize(u, dims, seeds, k)
