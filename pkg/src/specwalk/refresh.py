"""Reusing stored eigenvectors when the edge-weight parameter beta changes.

The stored eigenvectors are kept, but each diagonal value is replaced by the
Rayleigh quotient of that column against the normalized Laplacian rebuilt at
the new beta — equivalently, by the column's normalized-cut value on the new
graph. Columns are re-sorted by the refreshed values so truncation keeps the
best cuts. A set of packs at several betas acts as a coarse grid to pick the
nearest base from (log-scale distance in beta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ImageMismatch, InvalidParam, ZeroVector
from .fastrw import PackSet, SpectralPack
from .graphs import Laplacian, LaplacianMode, build_graph, laplacian
from .images import Image
from .linalg import EigenBasis


@dataclass(frozen=True)
class RefreshedPack:
    """Base eigenvectors with Rayleigh-quotient values on the new graph."""

    base: SpectralPack
    new_beta: float
    lambda_hat: np.ndarray           # ascending, one per kept column
    d_sqrt: np.ndarray               # degrees of the new graph
    order: np.ndarray                # base column index per refreshed column
    laplacian: Laplacian             # the new normalized Laplacian

    @property
    def dims(self):
        return self.base.dims

    @property
    def m(self) -> int:
        return self.lambda_hat.size

    @property
    def eigen(self) -> EigenBasis:
        vectors = np.asarray(self.base.eigen.vectors)[:, self.order]
        return EigenBasis(vectors=vectors, values=self.lambda_hat)

    @property
    def laplacian_mode(self) -> LaplacianMode:
        return LaplacianMode.NORMALIZED


def ncut_value(l_hat: Laplacian, q: np.ndarray) -> float:
    """Rayleigh quotient q^T L-hat q / q^T q (the relaxed cut value)."""
    q = np.asarray(q, dtype=np.float64)
    qq = q @ q
    if qq == 0.0:
        raise ZeroVector("cut value of the zero vector is undefined")
    return float(q @ (l_hat.matrix @ q)) / qq


def refresh(pack: SpectralPack, image: Image, new_beta: float) -> RefreshedPack:
    """Re-evaluate stored columns against the Laplacian at new_beta.

    The rebuilt normalized Laplacian rides along on the result; the online
    solve needs it anyway.
    """
    if new_beta < 0:
        raise InvalidParam("beta must be >= 0")
    if image.content_hash() != pack.provenance.image_hash:
        raise ImageMismatch("pack was precomputed from a different image")
    graph = build_graph(image, new_beta)
    lap = laplacian(graph, LaplacianMode.NORMALIZED)
    vectors = np.asarray(pack.eigen.vectors, dtype=np.float64)
    norms = np.einsum("ij,ij->j", vectors, vectors)
    quad = np.einsum("ij,ij->j", vectors, lap.matrix @ vectors)
    lam = np.maximum(quad / norms, 0.0)   # negative values are float noise
    order = np.argsort(lam, kind="stable")
    return RefreshedPack(base=pack, new_beta=float(new_beta),
                         lambda_hat=lam[order], d_sqrt=lap.d_sqrt,
                         order=order, laplacian=lap)


def refresh_from_set(packs: PackSet, image: Image,
                     new_beta: float) -> RefreshedPack:
    """Refresh from the pack whose beta is nearest on a log scale."""
    return refresh(nearest_pack(packs, new_beta), image, new_beta)


def nearest_pack(packs: PackSet, new_beta: float) -> SpectralPack:
    def distance(beta: float) -> float:
        if beta <= 0 or new_beta <= 0:
            return abs(beta - new_beta)
        return abs(math.log(new_beta) - math.log(beta))
    return min(packs.packs, key=lambda p: distance(p.beta))
