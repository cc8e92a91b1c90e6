"""Offline/online split: spectral packs on disk, fast online solves.

Offline, eigenpairs of the normalized Laplacian are computed and serialized
(.rwpk). Online, the truncated eigenbasis approximates the pseudo-inverse of
(L + gamma I): a dense system of size S (number of seeds) is solved for the
seed fluxes, and the non-seeded probabilities are reconstructed as a linear
combination of eigenvectors. With gamma = 0 the Laplacian's null direction
is handled by deflating it from the pseudo-inverse and carrying the column
sums of U as an extra unknown alongside the seed fluxes.
"""

from __future__ import annotations

import logging
import struct
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

import scipy.sparse as sp

from .errors import (ChecksumMismatch, FormatError, ImageMismatch,
                     InsufficientBasis, InvalidParam, IoError, NotConverged,
                     SingularSmallSystem)
from .graphs import Laplacian, LaplacianMode, build_graph, laplacian
from .images import Image, ProbabilityField
from .linalg import EIG_TOL, EigenBasis, smallest_eigs
from .solver import LabelProblem, _finalize

log = logging.getLogger(__name__)

PACK_MAGIC = b"RWPK"
PACK_VERSION = 1
M_CAP = 4096
MAX_SEEDS = 10_000
STREAM_BLOCK = 64
NULL_EIG_SNAP = 1e-3

# ---------------------------------------------------------------------------
# xxh64 (pure python) for the pack checksum
# ---------------------------------------------------------------------------

_P1 = 0x9E3779B185EBCA87
_P2 = 0xC2B2AE3D27D4EB4F
_P3 = 0x165667B19E3779F9
_P4 = 0x85EBCA77C2B2AE63
_P5 = 0x27D4EB2F165667C5
_M64 = (1 << 64) - 1


def _rotl(x: int, r: int) -> int:
    return ((x << r) | (x >> (64 - r))) & _M64


def _round64(acc: int, lane: int) -> int:
    return (_rotl((acc + lane * _P2) & _M64, 31) * _P1) & _M64


class Xxh64:
    """Streaming XXH64; feed bytes with update(), read digest()."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.v = [(seed + _P1 + _P2) & _M64, (seed + _P2) & _M64,
                  seed & _M64, (seed - _P1) & _M64]
        self.buffer = b""
        self.length = 0

    def update(self, data: bytes) -> "Xxh64":
        self.length += len(data)
        data = self.buffer + data
        n_stripes = len(data) // 32
        v1, v2, v3, v4 = self.v
        pos = 0
        for _ in range(n_stripes):
            l1, l2, l3, l4 = struct.unpack_from("<4Q", data, pos)
            v1 = (_rotl((v1 + l1 * _P2) & _M64, 31) * _P1) & _M64
            v2 = (_rotl((v2 + l2 * _P2) & _M64, 31) * _P1) & _M64
            v3 = (_rotl((v3 + l3 * _P2) & _M64, 31) * _P1) & _M64
            v4 = (_rotl((v4 + l4 * _P2) & _M64, 31) * _P1) & _M64
            pos += 32
        self.v = [v1, v2, v3, v4]
        self.buffer = data[pos:]
        return self

    def digest(self) -> int:
        if self.length >= 32:
            v1, v2, v3, v4 = self.v
            h = (_rotl(v1, 1) + _rotl(v2, 7) + _rotl(v3, 12) + _rotl(v4, 18)) & _M64
            for acc in (v1, v2, v3, v4):
                h = ((h ^ _round64(0, acc)) * _P1 + _P4) & _M64
        else:
            h = (self.seed + _P5) & _M64
        h = (h + self.length) & _M64
        data, pos = self.buffer, 0
        while pos + 8 <= len(data):
            h ^= _round64(0, struct.unpack_from("<Q", data, pos)[0])
            h = (_rotl(h, 27) * _P1 + _P4) & _M64
            pos += 8
        if pos + 4 <= len(data):
            h ^= (struct.unpack_from("<I", data, pos)[0] * _P1) & _M64
            h = (_rotl(h, 23) * _P2 + _P3) & _M64
            pos += 4
        while pos < len(data):
            h ^= (data[pos] * _P5) & _M64
            h = (_rotl(h, 11) * _P1) & _M64
            pos += 1
        h ^= h >> 33
        h = (h * _P2) & _M64
        h ^= h >> 29
        h = (h * _P3) & _M64
        h ^= h >> 32
        return h


def xxh64(data: bytes, seed: int = 0) -> int:
    return Xxh64(seed).update(data).digest()


# ---------------------------------------------------------------------------
# pack types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PackProvenance:
    image_hash: bytes
    eig_tol: float | None = None
    built_at: float | None = None


@dataclass(frozen=True)
class SpectralPack:
    """Serialized offline artifact: m smallest eigenpairs of L-hat."""

    dims: tuple[int, ...]
    spacing: tuple[float, ...]
    beta: float
    eigen: EigenBasis
    d_sqrt: np.ndarray
    provenance: PackProvenance
    neighborhood: str = "lattice"
    laplacian_mode: LaplacianMode = LaplacianMode.NORMALIZED

    @property
    def m(self) -> int:
        return self.eigen.m

    @property
    def n_vertices(self) -> int:
        return self.d_sqrt.size


@dataclass(frozen=True)
class PackSet:
    """Packs for one image at strictly ascending beta values."""

    packs: tuple[SpectralPack, ...]

    def __post_init__(self):
        if not self.packs:
            raise InvalidParam("PackSet needs at least one pack")
        betas = [p.beta for p in self.packs]
        if any(b2 <= b1 for b1, b2 in zip(betas, betas[1:])):
            raise InvalidParam("pack betas must be strictly ascending")
        ref = self.packs[0]
        for p in self.packs[1:]:
            if p.dims != ref.dims:
                raise InvalidParam("packs must share dims")
            if p.provenance.image_hash != ref.provenance.image_hash:
                raise InvalidParam("packs must come from the same image")
        object.__setattr__(self, "packs", tuple(self.packs))

    @property
    def betas(self) -> list[float]:
        return [p.beta for p in self.packs]


def _snap_null_vector(basis: EigenBasis, d_sqrt: np.ndarray) -> EigenBasis:
    """Replace the first eigenpair with the exact null direction of L-hat.

    Vectors come back Fortran-ordered so column blocks slice contiguously.
    """
    values = basis.values.copy()
    vectors = np.asfortranarray(basis.vectors, dtype=np.float64)
    if values[0] <= NULL_EIG_SNAP:
        g = d_sqrt / np.linalg.norm(d_sqrt)
        vectors[:, 0] = g
        values[0] = 0.0
        if basis.m > 1:
            rest = vectors[:, 1:]
            for _ in range(2):
                rest -= np.outer(g, g @ rest)
            rest /= np.linalg.norm(rest, axis=0)
            vectors[:, 1:] = rest
    return EigenBasis(vectors=vectors, values=values)


def precompute(image: Image, beta: float, m: int,
               eig_tol: float = EIG_TOL, seed: int = 0) -> SpectralPack:
    """Offline phase: eigenpairs of the normalized Laplacian at one beta."""
    n = image.n_voxels
    if not 1 <= m <= min(n, M_CAP):
        raise InvalidParam(f"need 1 <= m <= min(N, {M_CAP}), got {m}")
    graph = build_graph(image, beta)
    lap = laplacian(graph, LaplacianMode.NORMALIZED)
    try:
        basis = smallest_eigs(lap.matrix, m, eig_tol=eig_tol, seed=seed)
    except NotConverged as exc:
        if exc.partial is None or exc.partial.m == 0:
            raise
        log.warning("eigensolver converged %d of %d pairs; pack truncated",
                    exc.converged, m)
        basis = exc.partial
    basis = _snap_null_vector(basis, lap.d_sqrt)
    return SpectralPack(
        dims=image.dims, spacing=image.spacing, beta=float(beta),
        eigen=basis, d_sqrt=lap.d_sqrt,
        provenance=PackProvenance(image_hash=image.content_hash(),
                                  eig_tol=eig_tol, built_at=time.time()))


# ---------------------------------------------------------------------------
# pack file format
# ---------------------------------------------------------------------------

def save_pack(pack: SpectralPack, path) -> None:
    """Write the binary .rwpk layout; byte-identical for identical packs."""
    d = len(pack.dims)
    header = b"".join([
        PACK_MAGIC,
        struct.pack("<I", PACK_VERSION),
        struct.pack("<B", d),
        np.asarray(pack.dims, dtype="<u8").tobytes(),
        np.asarray(pack.spacing, dtype="<f8").tobytes(),
        struct.pack("<d", pack.beta),
        struct.pack("<I", pack.m),
        struct.pack("<Q", pack.n_vertices),
    ])
    values = pack.eigen.values.astype("<f8").tobytes()
    d_sqrt = pack.d_sqrt.astype("<f4").tobytes()
    q_colmajor = np.asfortranarray(pack.eigen.vectors.astype("<f4")).tobytes(order="F")
    hasher = Xxh64()
    for chunk in (header, values, d_sqrt, q_colmajor):
        hasher.update(chunk)
    checksum = struct.pack("<Q", hasher.digest())
    try:
        with open(path, "wb") as fh:
            for chunk in (header, values, d_sqrt, q_colmajor, checksum,
                          pack.provenance.image_hash):
                fh.write(chunk)
    except OSError as exc:
        raise IoError(str(exc)) from exc


def _read_exact(fh, count: int, what: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise FormatError(f"pack file truncated while reading {what}")
    return data


def load_pack(path, mmap: bool = False) -> SpectralPack:
    """Read and validate a .rwpk file.

    With ``mmap=True`` the eigenvector block is memory-mapped instead of
    loaded, so solves can stream it in column blocks.
    """
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise IoError(str(exc)) from exc
    with fh:
        if _read_exact(fh, 4, "magic") != PACK_MAGIC:
            raise FormatError(f"{path}: not a pack file (bad magic)")
        version = struct.unpack("<I", _read_exact(fh, 4, "version"))[0]
        if version != PACK_VERSION:
            raise FormatError(f"{path}: unsupported pack version {version}")
        d = struct.unpack("<B", _read_exact(fh, 1, "rank"))[0]
        if d not in (1, 2, 3):
            raise FormatError(f"{path}: bad dimensionality {d}")
        dims = np.frombuffer(_read_exact(fh, 8 * d, "dims"), dtype="<u8")
        spacing = np.frombuffer(_read_exact(fh, 8 * d, "spacing"), dtype="<f8")
        beta = struct.unpack("<d", _read_exact(fh, 8, "beta"))[0]
        m = struct.unpack("<I", _read_exact(fh, 4, "m"))[0]
        n = struct.unpack("<Q", _read_exact(fh, 8, "N"))[0]
        if int(np.prod(dims)) != n:
            raise FormatError(f"{path}: dims/N mismatch")
        values = np.frombuffer(_read_exact(fh, 8 * m, "eigenvalues"), dtype="<f8")
        d_sqrt = np.frombuffer(_read_exact(fh, 4 * n, "d_sqrt"), dtype="<f4")
        q_offset = fh.tell()
        q_bytes = 4 * n * m
        fh.seek(0, 2)
        file_size = fh.tell()
        expected = q_offset + q_bytes + 8 + 32
        if file_size != expected:
            raise FormatError(
                f"{path}: size {file_size} != expected {expected} bytes")
        # checksum covers everything before it
        fh.seek(0)
        hasher = Xxh64()
        remaining = q_offset + q_bytes
        while remaining:
            chunk = fh.read(min(remaining, 1 << 23))
            hasher.update(chunk)
            remaining -= len(chunk)
        stored = struct.unpack("<Q", _read_exact(fh, 8, "checksum"))[0]
        if hasher.digest() != stored:
            raise ChecksumMismatch(f"{path}: checksum mismatch")
        image_hash = _read_exact(fh, 32, "image hash")
        if mmap:
            vectors = np.memmap(path, dtype="<f4", mode="r",
                                offset=q_offset, shape=(int(n), int(m)), order="F")
        else:
            fh.seek(q_offset)
            raw = np.frombuffer(_read_exact(fh, q_bytes, "eigenvectors"), dtype="<f4")
            vectors = raw.reshape((int(n), int(m)), order="F")
    basis = EigenBasis(vectors=vectors, values=values.astype(np.float64))
    return SpectralPack(
        dims=tuple(int(x) for x in dims),
        spacing=tuple(float(s) for s in spacing),
        beta=float(beta), eigen=basis,
        d_sqrt=d_sqrt.astype(np.float64),
        provenance=PackProvenance(image_hash=image_hash))


# ---------------------------------------------------------------------------
# online solve
# ---------------------------------------------------------------------------

def _dense_solve(a: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """LU solve with a singularity check on the seed system."""
    try:
        lu, piv = sla.lu_factor(a)
    except sla.LinAlgError as exc:
        raise SingularSmallSystem(f"seed system is singular: {exc}") from exc
    anorm = np.linalg.norm(a, 1) if a.size else 0.0
    rcond = sla.lapack.dgecon(lu, anorm, norm="1")[0] if a.size else 1.0
    if not np.isfinite(rcond) or rcond < 1e-14:
        raise SingularSmallSystem(
            f"seed system numerically singular (cond ~ {1.0 / max(rcond, 1e-300):.3e})",
            condition=1.0 / max(rcond, 1e-300))
    return sla.lu_solve((lu, piv), rhs)


def _column_blocks(m: int, block: int):
    for start in range(0, m, block):
        yield start, min(start + block, m)


def solve_fast(pack, lap: Laplacian, prob: LabelProblem, m_use: int | None = None,
               streaming_block: int | None = None) -> ProbabilityField:
    """Online solve from precomputed eigenpairs, truncated to m_use columns.

    ``pack`` is a SpectralPack or anything exposing the same eigen/d_sqrt
    surface (a refreshed pack, a coarse pack on an aggregate graph). ``lap``
    is the normalized Laplacian of the same graph; only its seeded rows are
    read. ``streaming_block`` bounds how many eigenvector columns are
    materialized at once (defaults to everything, or 64 for memmapped packs).
    """
    eigen: EigenBasis = pack.eigen
    d_sqrt = np.asarray(pack.d_sqrt, dtype=np.float64)
    n = d_sqrt.size
    k = prob.K
    if m_use is None:
        m_use = eigen.m
    if not 1 <= m_use <= eigen.m:
        raise InvalidParam(f"m_use must be in 1..{eigen.m}")
    if m_use < k:
        raise InsufficientBasis(f"m_use={m_use} cannot represent {k} labels")
    if prob.laplacian_mode is not LaplacianMode.NORMALIZED:
        raise InvalidParam("the fast path requires the normalized mode")
    if lap.n_vertices != n:
        raise InvalidParam("Laplacian size does not match the pack")
    seeds = prob.seeds
    s = seeds.n_seeds
    if s > MAX_SEEDS:
        raise InvalidParam(f"at most {MAX_SEEDS} seeds supported, got {s}")
    if streaming_block is None:
        streaming_block = STREAM_BLOCK if isinstance(eigen.vectors, np.memmap) else m_use
    block = max(1, min(streaming_block, m_use))

    gamma = prob.gamma
    values = np.asarray(eigen.values[:m_use], dtype=np.float64)
    s_idx = seeds.seed_indices
    n_idx = seeds.nonseed_indices()
    u = np.zeros((n, k))
    if n_idx.size == 0:
        return _finalize(u, pack.dims, seeds, k)

    # Right-hand operands with seed rows zeroed: Q^T M equals Q_n^T M_n then,
    # so no per-block row gathers are needed (pure GEMMs over the columns).
    p_masked = None
    if prob.priors is not None:
        p_masked = prob.priors * d_sqrt[:, None]
        p_masked[s_idx] = 0.0

    if gamma == 0:
        weights = np.where(values > 1e-10, 1.0, 0.0)
        weights[values > 1e-10] /= values[values > 1e-10]
    else:
        weights = 1.0 / (values + gamma)

    seed_rows = lap.matrix[s_idx] if s else None
    l_s = seed_rows[:, s_idx].toarray() if s else np.zeros((0, 0))

    # pass 1: project the pack columns onto the seed structure
    q_s = np.empty((s, m_use))
    b_qn = np.empty((s, m_use))          # B @ Q_n = rows(L)@Q - L_s@Q_s
    t_p = np.empty((m_use, k)) if p_masked is not None else None
    g = d_sqrt / np.linalg.norm(d_sqrt)
    g_masked = g.copy()
    g_masked[s_idx] = 0.0
    gq = np.empty(m_use) if gamma == 0 else None
    vecs = eigen.vectors
    for lo, hi in _column_blocks(m_use, block):
        qb = np.asarray(vecs[:, lo:hi], dtype=np.float64)
        q_s_blk = qb[s_idx]
        q_s[:, lo:hi] = q_s_blk
        if s:
            b_qn[:, lo:hi] = seed_rows @ qb - l_s @ q_s_blk
        if t_p is not None:
            t_p[lo:hi] = qb.T @ p_masked
        if gq is not None:
            gq[lo:hi] = qb.T @ g_masked

    u_s_hat = seeds.one_hot(k) * d_sqrt[s_idx, None]

    if gamma > 0:
        if s:
            a_s = np.eye(s) - (b_qn * weights) @ q_s.T
            rhs = l_s @ u_s_hat + gamma * u_s_hat
            rhs += gamma * (b_qn * weights) @ t_p
            f_s = _dense_solve(a_s, rhs)
            coeff = weights[:, None] * (q_s.T @ f_s + gamma * t_p)
        else:
            coeff = weights[:, None] * (gamma * t_p)
        extra = None
    else:
        # gamma = 0: deflate the null direction, solve for (F_s, column sums)
        g_s = g[s_idx]
        a = np.empty((s + 1, s + 1))
        a[:s, :s] = np.eye(s) - (b_qn * weights) @ q_s.T
        a[:s, s] = -(seed_rows @ g_masked)   # = -B g_n (seed entries zeroed)
        a[s, :s] = -(gq * weights) @ q_s.T
        a[s, s] = g_s @ g_s
        rhs = np.empty((s + 1, k))
        rhs[:s] = l_s @ u_s_hat
        rhs[s] = g_s @ u_s_hat
        sol = _dense_solve(a, rhs)
        f_s, c = sol[:s], sol[s]
        coeff = weights[:, None] * (q_s.T @ f_s)
        extra = c

    # pass 2: reconstruct U_n from the eigenvector columns
    u_hat = np.zeros((n, k))
    for lo, hi in _column_blocks(m_use, block):
        qb = np.asarray(vecs[:, lo:hi], dtype=np.float64)
        u_hat += qb @ coeff[lo:hi]
    if extra is not None:
        u_hat += np.outer(g_masked, extra)

    u[n_idx] = u_hat[n_idx] / d_sqrt[n_idx, None]
    row_dev = float(np.abs(u[n_idx].sum(axis=1) - 1.0).max()) if n_idx.size else 0.0
    log.debug("solve_fast m_use=%d row-sum deviation %.3e", m_use, row_dev)
    return _finalize(u, pack.dims, seeds, k)
