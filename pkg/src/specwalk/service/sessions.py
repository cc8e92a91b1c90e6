"""In-memory session registry for the interactive loop.

A session owns one image, its pack set, the currently effective (possibly
refreshed) pack, and the last solve. Solves take a non-blocking per-session
lock; an overlapping request is the caller's error (409 upstream).
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field

import numpy as np

from ..adaptive import AdaptivePolicy, select_m
from ..errors import ImageMismatch, InvalidParam, IoError
from ..fastrw import PackSet, load_pack, solve_fast
from ..graphs import LaplacianMode, SeedPartition, build_graph, laplacian
from ..images import Image, load_image
from ..refresh import refresh_from_set
from ..solver import LabelProblem


class SolveInFlight(Exception):
    pass


@dataclass
class SolveResult:
    labels: np.ndarray
    max_prob: np.ndarray
    m_use: int
    online_ms: float
    num_labels: int


@dataclass
class Session:
    id: str
    image: Image
    packs: PackSet
    gamma: float
    epsilon: float
    beta: float
    refreshed: bool = False
    base_beta: float = 0.0
    lock: threading.Lock = field(default_factory=threading.Lock)
    current_pack: object = None
    current_lap: object = None
    last: SolveResult | None = None
    timing_log: list[dict] = field(default_factory=list)

    @property
    def dims(self):
        return self.image.dims


class SessionStore:
    def __init__(self):
        self._sessions: dict[str, Session] = {}
        self._guard = threading.Lock()

    def create(self, image_path: str, pack_paths: list[str], gamma: float,
               epsilon: float, beta: float | None) -> Session:
        image = load_image(image_path)
        packs = PackSet(tuple(sorted((load_pack(p) for p in pack_paths),
                                     key=lambda p: p.beta)))
        for pack in packs.packs:
            if pack.provenance.image_hash != image.content_hash():
                raise ImageMismatch(
                    "pack was not precomputed from this image")
        session = Session(id=uuid.uuid4().hex[:12], image=image, packs=packs,
                          gamma=gamma, epsilon=epsilon,
                          beta=packs.packs[0].beta,
                          base_beta=packs.packs[0].beta)
        session.current_pack = packs.packs[0]
        session.current_lap = laplacian(build_graph(image, session.beta),
                                        LaplacianMode.NORMALIZED)
        if beta is not None:
            self._apply_beta(session, beta)
        with self._guard:
            self._sessions[session.id] = session
        return session

    def get(self, session_id: str) -> Session | None:
        with self._guard:
            return self._sessions.get(session_id)

    def delete(self, session_id: str) -> bool:
        with self._guard:
            return self._sessions.pop(session_id, None) is not None

    def _apply_beta(self, session: Session, beta: float) -> bool:
        if beta == session.beta:
            return False
        refreshed = refresh_from_set(session.packs, session.image, beta)
        session.current_pack = refreshed
        session.current_lap = refreshed.laplacian
        session.beta = beta
        session.base_beta = refreshed.base.beta
        session.refreshed = True
        return True

    def update_params(self, session: Session, gamma=None, beta=None,
                      epsilon=None) -> bool:
        """Returns True when the pack was refreshed for a new beta."""
        if gamma is not None:
            if gamma < 0:
                raise InvalidParam("gamma must be >= 0")
            session.gamma = gamma
        if epsilon is not None:
            if epsilon <= 0:
                raise InvalidParam("epsilon must be > 0")
            session.epsilon = epsilon
        if beta is not None:
            if beta < 0:
                raise InvalidParam("beta must be >= 0")
            return self._apply_beta(session, beta)
        return False

    def solve(self, session: Session, seeds: SeedPartition,
              adaptive: bool = True, m_use: int | None = None) -> SolveResult:
        if not session.lock.acquire(blocking=False):
            raise SolveInFlight(session.id)
        try:
            t0 = time.perf_counter()
            k = seeds.num_labels
            gamma = session.gamma
            priors = None
            if gamma > 0:
                priors = np.full((session.image.n_voxels, k), 1.0 / k)
            prob = LabelProblem(num_labels=k, seeds=seeds, priors=priors,
                                gamma=gamma,
                                laplacian_mode=LaplacianMode.NORMALIZED)
            pack = session.current_pack
            if adaptive and m_use is None:
                chosen, _ = select_m(pack, prob,
                                     AdaptivePolicy(epsilon=session.epsilon))
            else:
                chosen = m_use if m_use is not None else pack.m
            fieldp = solve_fast(pack, session.current_lap, prob, m_use=chosen)
            values = fieldp.values
            labels = np.argmax(values, axis=1)
            max_prob = np.round(values.max(axis=1) * 255.0).astype(np.uint8)
            online_ms = (time.perf_counter() - t0) * 1000.0
            result = SolveResult(labels=labels, max_prob=max_prob,
                                 m_use=chosen, online_ms=online_ms,
                                 num_labels=k)
            session.last = result
            session.timing_log.append(
                {"seeds": seeds.n_seeds, "m_use": chosen,
                 "online_ms": online_ms})
            return result
        finally:
            session.lock.release()


def rle_encode(labels: np.ndarray) -> list[tuple[int, int]]:
    """(value, run) pairs over the flat x-fastest label array."""
    if labels.size == 0:
        return []
    changes = np.flatnonzero(np.diff(labels)) + 1
    starts = np.concatenate([[0], changes])
    ends = np.concatenate([changes, [labels.size]])
    return [(int(labels[s]), int(e - s)) for s, e in zip(starts, ends)]
