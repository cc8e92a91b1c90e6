"""HTTP service exposing the interactive seeding loop."""

from __future__ import annotations

import base64
import io
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Response

from .. import errors
from ..graphs import SeedPartition
from .schemas import (CreateSessionRequest, ParamsRequest, ParamsResponse,
                      SeedsRequest, SessionInfo, SolveResponse)
from .sessions import Session, SessionStore, SolveInFlight, rle_encode

_NUMERIC_ERRORS = (errors.NotConverged, errors.SingularSystem,
                   errors.SingularSmallSystem, errors.InsufficientBasis,
                   errors.EmptyBasis, errors.DegenerateGraph)


def _session_or_404(store: SessionStore, session_id: str) -> Session:
    session = store.get(session_id)
    if session is None:
        raise HTTPException(status_code=404, detail=f"no session {session_id}")
    return session


def _info(session: Session) -> SessionInfo:
    return SessionInfo(
        id=session.id, dims=list(session.dims),
        num_labels=session.last.num_labels if session.last else None,
        beta=session.beta, gamma=session.gamma, epsilon=session.epsilon,
        pack_m=session.current_pack.m, refreshed=session.refreshed)


def create_app(frontend_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="specwalk", version="0.1.0")
    store = SessionStore()
    app.state.store = store

    @app.post("/sessions", response_model=SessionInfo)
    def create_session(req: CreateSessionRequest):
        try:
            session = store.create(req.image_path, req.pack_paths,
                                   req.gamma, req.epsilon, req.beta)
        except (errors.IoError, errors.FormatError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        except errors.ImageMismatch as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return _info(session)

    @app.get("/sessions/{session_id}", response_model=SessionInfo)
    def session_info(session_id: str):
        return _info(_session_or_404(store, session_id))

    @app.get("/sessions/{session_id}/slice")
    def slice_png(session_id: str, axis: int = -1, index: int = 0):
        from PIL import Image as PilImage

        session = _session_or_404(store, session_id)
        dims = session.dims
        grid = session.image.intensities.reshape(dims, order="F")
        if len(dims) == 2:
            plane = grid
        else:
            if not 0 <= axis < 3:
                raise HTTPException(status_code=422,
                                    detail="axis must be 0, 1 or 2")
            if not 0 <= index < dims[axis]:
                raise HTTPException(status_code=422, detail="index out of range")
            plane = np.take(grid, index, axis=axis)
        pixels = np.round(plane.T * 255.0).astype(np.uint8)
        buf = io.BytesIO()
        PilImage.fromarray(pixels, mode="L").save(buf, format="PNG")
        return Response(content=buf.getvalue(), media_type="image/png")

    @app.put("/sessions/{session_id}/params", response_model=ParamsResponse)
    def update_params(session_id: str, req: ParamsRequest):
        session = _session_or_404(store, session_id)
        try:
            refreshed_now = store.update_params(
                session, gamma=req.gamma, beta=req.beta, epsilon=req.epsilon)
        except errors.InvalidParam as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        except _NUMERIC_ERRORS as exc:
            raise HTTPException(status_code=500, detail=str(exc))
        return ParamsResponse(refreshed=refreshed_now,
                              base_beta=session.base_beta, beta=session.beta,
                              gamma=session.gamma, epsilon=session.epsilon)

    @app.post("/sessions/{session_id}/seeds", response_model=SolveResponse)
    def post_seeds(session_id: str, req: SeedsRequest):
        session = _session_or_404(store, session_id)
        n = session.image.n_voxels
        if not req.seeds:
            raise HTTPException(status_code=422, detail="no seeds supplied")
        try:
            seeds = SeedPartition(
                n, [s.index for s in req.seeds], [s.label for s in req.seeds])
        except (errors.InvalidParam, IndexError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        try:
            result = store.solve(session, seeds, adaptive=req.adaptive,
                                 m_use=req.m_use)
        except SolveInFlight:
            raise HTTPException(status_code=409,
                                detail="a solve is already in flight")
        except (errors.InvalidParam, errors.InsufficientBasis) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        except _NUMERIC_ERRORS as exc:
            raise HTTPException(status_code=500, detail=str(exc))
        return SolveResponse(
            dims=list(session.dims), num_labels=result.num_labels,
            labels_rle=rle_encode(result.labels),
            max_prob_b64=base64.b64encode(result.max_prob.tobytes()).decode(),
            m_use=result.m_use, online_ms=result.online_ms,
            refreshed=session.refreshed, base_beta=session.base_beta)

    @app.delete("/sessions/{session_id}", status_code=204)
    def delete_session(session_id: str):
        if not store.delete(session_id):
            raise HTTPException(status_code=404, detail=f"no session {session_id}")
        return Response(status_code=204)

    if frontend_dir and Path(frontend_dir).is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=frontend_dir, html=True),
                  name="frontend")
    return app
