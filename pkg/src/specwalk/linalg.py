"""Sparse numeric kernel: CG, smallest eigenpairs, Gram-Schmidt.

The eigensolver is a blocked Krylov iteration with full reorthogonalization
and Rayleigh-Ritz extraction. Krylov directions are generated with a
shift-inverted operator (sparse LU of A + sigma*I) so the smallest end of a
Laplacian spectrum converges in a subspace not much larger than requested.
Start blocks are seeded, so results are deterministic run to run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NotConverged

CG_TOL = 1e-8
EIG_TOL = 1e-6
EIG_BLOCK = 8
GS_DROP_TOL = 1e-10


@dataclass(frozen=True)
class EigenBasis:
    """m orthonormal eigenvectors (columns) with ascending eigenvalues."""

    vectors: np.ndarray              # (N, m)
    values: np.ndarray               # (m,)

    @property
    def m(self) -> int:
        return self.values.size

    def prefix(self, m: int) -> "EigenBasis":
        return EigenBasis(self.vectors[:, :m], self.values[:m])


def cg_solve(a, rhs: np.ndarray, tol: float = CG_TOL,
             max_iter: int | None = None, stats: dict | None = None) -> np.ndarray:
    """Jacobi-preconditioned CG for each column of rhs.

    Raises NotConverged (with per-column relative residuals) if any column
    fails to reach ``tol`` within ``max_iter`` iterations.
    """
    rhs = np.asarray(rhs, dtype=np.float64)
    single = rhs.ndim == 1
    b_mat = rhs[:, None] if single else rhs
    n = b_mat.shape[0]
    if max_iter is None:
        max_iter = 10 * n
    diag = a.diagonal() if sp.issparse(a) else np.asarray(a).diagonal()
    m = sp.diags(1.0 / np.where(diag > 0, diag, 1.0))
    x = np.zeros_like(b_mat)
    iters = []
    residuals = np.zeros(b_mat.shape[1])
    failed = False
    for k in range(b_mat.shape[1]):
        b = b_mat[:, k]
        if not np.any(b):
            iters.append(0)
            continue
        count = [0]
        xk, info = spla.cg(a, b, rtol=tol, atol=0.0, maxiter=max_iter, M=m,
                           callback=lambda _: count.__setitem__(0, count[0] + 1))
        x[:, k] = xk
        iters.append(count[0])
        residuals[k] = np.linalg.norm(a @ xk - b) / np.linalg.norm(b)
        failed = failed or info != 0
    if stats is not None:
        stats["iterations"] = iters
        stats["residuals"] = residuals
    if failed:
        raise NotConverged("CG did not reach tolerance on every column",
                           residuals=residuals, partial=x[:, 0] if single else x)
    return x[:, 0] if single else x


def _orthonormalize_block(block: np.ndarray, basis: np.ndarray | None,
                          drop_tol: float = 1e-12) -> np.ndarray:
    """Two-pass projection of `block` against `basis`, then internal QR."""
    for _ in range(2):
        if basis is not None and basis.size:
            block = block - basis @ (basis.T @ block)
    q, r = np.linalg.qr(block)
    keep = np.abs(np.diag(r)) > drop_tol
    return q[:, keep]


def _canonical_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip column signs so the largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def smallest_eigs(a: sp.spmatrix, m: int, eig_tol: float = EIG_TOL,
                  seed: int = 0, max_dim: int | None = None) -> EigenBasis:
    """Eigenpairs for the m smallest eigenvalues of a symmetric PSD matrix.

    Raises NotConverged carrying the converged prefix as ``partial`` when the
    subspace cap is hit first.
    """
    a = a.tocsr()
    n = a.shape[0]
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= {n}, got {m}")
    if max_dim is None:
        max_dim = min(n, max(4 * m + 64, m + 128))
    rng = np.random.default_rng(seed)
    sigma = 0.01
    lu = spla.splu((a + sigma * sp.identity(n, format="csr")).tocsc())

    # fatter blocks keep the reorthogonalization GEMM-bound at large m,
    # but each block costs one Krylov depth step, so cap the width
    block = min(max(EIG_BLOCK, min(64, m // 12)), n)
    cap = min(max_dim, n)
    basis = np.empty((n, cap))           # filled left to right
    a_basis = np.empty((n, cap))
    t_mat = np.zeros((cap, cap))         # basis^T A basis, grown with it
    dim = 0

    def append(cols: np.ndarray) -> int:
        nonlocal dim
        take = min(cols.shape[1], cap - dim)
        cols = cols[:, :take]
        a_cols = a @ cols
        t_mat[:dim, dim:dim + take] = basis[:, :dim].T @ a_cols
        t_mat[dim:dim + take, :dim] = t_mat[:dim, dim:dim + take].T
        t_mat[dim:dim + take, dim:dim + take] = cols.T @ a_cols
        basis[:, dim:dim + take] = cols
        a_basis[:, dim:dim + take] = a_cols
        dim += take
        return take

    start = _orthonormalize_block(rng.standard_normal((n, block)), None)
    append(start)
    last = start
    next_check = min(m, cap)

    while True:
        saturated = dim >= cap
        if saturated or dim >= next_check:
            theta, z = np.linalg.eigh(t_mat[:dim, :dim])
            take = min(m, dim)
            y = basis[:, :dim] @ z[:, :take]
            res = np.linalg.norm(a_basis[:, :dim] @ z[:, :take]
                                 - y * theta[:take], axis=0)
            ok = res <= eig_tol * np.maximum(1.0, np.abs(theta[:take]))
            converged = take if ok.all() else int(np.argmin(ok))
            if dim >= n:
                converged = take  # exact Rayleigh-Ritz on the full space
            if converged >= m:
                vectors = _canonical_signs(y[:, :m])
                return EigenBasis(vectors=vectors, values=theta[:m].copy())
            if saturated:
                vectors = _canonical_signs(y[:, :converged])
                partial = EigenBasis(vectors=vectors, values=theta[:converged].copy())
                raise NotConverged(
                    f"only {converged}/{m} eigenpairs converged "
                    f"(subspace cap {max_dim})",
                    partial=partial, converged=converged)
            next_check = min(cap, dim + max(block, m // 8))
        grown = _orthonormalize_block(lu.solve(last), basis[:, :dim])
        if grown.shape[1] == 0:
            # Krylov space exhausted; restart with fresh random directions
            grown = _orthonormalize_block(rng.standard_normal((n, block)),
                                          basis[:, :dim])
            if grown.shape[1] == 0:
                continue
        append(grown)
        last = grown


def gram_schmidt(v: np.ndarray, drop_tol: float = GS_DROP_TOL) -> np.ndarray:
    """Modified Gram-Schmidt, two passes; near-dependent columns dropped.

    Column order is preserved for the survivors.
    """
    v = np.array(v, dtype=np.float64)
    n, m = v.shape
    kept: list[np.ndarray] = []
    for j in range(m):
        col = v[:, j].copy()
        for _ in range(2):
            for q in kept:
                col -= q @ col * q
        norm = np.linalg.norm(col)
        if norm < drop_tol:
            continue
        kept.append(col / norm)
    if not kept:
        return np.zeros((n, 0))
    return np.column_stack(kept)
