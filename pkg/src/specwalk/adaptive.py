"""Online choice of how many precomputed eigenvectors to use.

Two representability tests drive the choice: a constrained least-squares fit
of the seed labels by the seeded rows of the eigenvectors, and the residual
of projecting prior columns onto the eigenvector span. Both are evaluated on
a growing prefix of the basis until every tested criterion clears its
threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import LaplacianMode
from .solver import LabelProblem

DEFAULT_EPSILON = 0.1
DEFAULT_STRIDE = 4


@dataclass
class AdaptivePolicy:
    """Thresholds and schedule for the online eigenvector count."""

    epsilon: float = DEFAULT_EPSILON
    stride: int = DEFAULT_STRIDE          # label subsampling stride per axis
    m_start: int | None = None            # default max(K, m/8)
    m_step: int | None = None             # default m/8
    grid_extents: tuple[int, ...] | None = None  # displacement grid, if any

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")

    def seed_threshold(self, n_seeds: int) -> float:
        return n_seeds * self.epsilon ** 2

    def prior_threshold(self, n_vertices: int) -> float:
        return n_vertices * self.epsilon ** 2

    def schedule(self, pack_m: int, k: int) -> list[int]:
        step = self.m_step if self.m_step is not None else max(1, pack_m // 8)
        start = self.m_start if self.m_start is not None else max(k, pack_m // 8)
        start = min(max(start, k, 1), pack_m)
        out = list(range(start, pack_m + 1, max(1, step)))
        if not out or out[-1] != pack_m:
            out.append(pack_m)
        return out

    def label_subset(self, k: int) -> np.ndarray:
        """Labels to test priors on: a strided sub-grid, or everything."""
        if self.grid_extents is None or self.stride == 1:
            return np.arange(k)
        coords = [np.arange(0, n, self.stride) for n in self.grid_extents]
        mesh = np.meshgrid(*coords, indexing="ij")
        strides = np.cumprod([1, *self.grid_extents[:-1]])
        flat = sum(c * s for c, s in zip(mesh, strides))
        return np.sort(flat.ravel())


def norm_bound(mode: LaplacianMode, degrees_or_n) -> float:
    """Largest possible coefficient norm of a probability column."""
    if mode is LaplacianMode.UNNORMALIZED:
        return float(np.sqrt(degrees_or_n))
    return float(np.sqrt(np.sum(degrees_or_n)))


def seed_fit(q_s: np.ndarray, u_s_k: np.ndarray, bound: float) -> float:
    """min over ||alpha|| <= bound of ||Q_s alpha - u_s_k||^2.

    Solved unconstrained first; if the minimum-norm solution violates the
    bound, the ridge multiplier is found by bisection on ||alpha(mu)||.
    """
    q_s = np.asarray(q_s, dtype=np.float64)
    u = np.asarray(u_s_k, dtype=np.float64).ravel()
    if bound <= 0:
        return float(u @ u)
    uu, sing, _ = np.linalg.svd(q_s, full_matrices=False)
    b = uu.T @ u
    perp = float(u @ u - b @ b)
    keep = sing > max(1e-13 * (sing[0] if sing.size else 0.0), 1e-300)
    sing, b_kept = sing[keep], b[keep]
    if sing.size == 0:
        return float(u @ u)

    def alpha_norm2(mu: float) -> float:
        z = sing * b_kept / (sing ** 2 + mu)
        return float(z @ z)

    if alpha_norm2(0.0) <= bound ** 2:
        return float(max(perp, 0.0))  # range-space residual is zero unconstrained
    # bisection on mu: ||alpha|| is strictly decreasing in mu
    lo, hi = 0.0, float(sing[0] * np.linalg.norm(b_kept) / bound)
    while alpha_norm2(hi) > bound ** 2:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if alpha_norm2(mid) > bound ** 2:
            lo = mid
        else:
            hi = mid
        if abs(np.sqrt(alpha_norm2(hi)) - bound) <= 1e-6 * bound:
            break
    z = sing * b_kept / (sing ** 2 + hi)
    resid = b_kept - sing * z
    return float(max(perp + resid @ resid, 0.0))


def prior_residual(q: np.ndarray, p_k: np.ndarray,
                   cached: np.ndarray | None = None,
                   cached_m: int = 0) -> tuple[float, np.ndarray]:
    """Squared residual of projecting p_k onto span(Q).

    With a cached residual from the first ``cached_m`` columns, only the new
    columns are projected out, which is exact because columns are orthonormal.
    """
    q = np.asarray(q, dtype=np.float64)
    if cached is not None:
        r = cached.astype(np.float64, copy=True)
        fresh = q[:, cached_m:]
    else:
        r = np.asarray(p_k, dtype=np.float64).copy()
        fresh = q
    if fresh.shape[1]:
        r -= fresh @ (fresh.T @ r)
    return float(r @ r), r


def select_m(pack, prob: LabelProblem, policy: AdaptivePolicy | None = None
             ) -> tuple[int, dict]:
    """Smallest scheduled m whose criteria all pass, else pack.m with a flag.

    Returns (m_use, info); info carries the evaluated f/g values per step and
    ``saturated=True`` when no tested m passed.
    """
    policy = policy or AdaptivePolicy()
    k = prob.K
    d_sqrt = np.asarray(pack.d_sqrt, dtype=np.float64)
    n = d_sqrt.size
    degrees = d_sqrt ** 2
    bound = norm_bound(LaplacianMode.NORMALIZED, degrees)
    seeds = prob.seeds
    vectors = pack.eigen.vectors

    u_s_hat = None
    if seeds.n_seeds:
        u_s_hat = seeds.one_hot(k) * d_sqrt[seeds.seed_indices, None]
    p_hat = None
    test_labels = np.arange(0)
    if prob.priors is not None:
        test_labels = policy.label_subset(k)
        p_hat = prob.priors[:, test_labels] * d_sqrt[:, None]

    f_max = policy.seed_threshold(seeds.n_seeds) if u_s_hat is not None else None
    g_max = policy.prior_threshold(n) if p_hat is not None else None

    residuals: list[np.ndarray | None] = [None] * test_labels.size
    cached_m = 0
    info: dict = {"steps": [], "saturated": False}
    for m in policy.schedule(pack.m, k):
        step = {"m": m, "f": [], "g": []}
        ok = True
        if u_s_hat is not None:
            q_s = np.asarray(vectors[seeds.seed_indices, :m], dtype=np.float64)
            for col in range(k):
                f_val = seed_fit(q_s, u_s_hat[:, col], bound)
                step["f"].append(f_val)
                ok = ok and f_val <= f_max
        if p_hat is not None:
            q_m = np.asarray(vectors[:, :m], dtype=np.float64)
            for j in range(test_labels.size):
                g_val, residuals[j] = prior_residual(
                    q_m, p_hat[:, j], residuals[j], cached_m)
                step["g"].append(g_val)
                ok = ok and g_val <= g_max
        cached_m = m
        info["steps"].append(step)
        if ok:
            return m, info
    info["saturated"] = True
    return pack.m, info
