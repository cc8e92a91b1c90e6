"""Request/response models for the interactive seeding service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class CreateSessionRequest(BaseModel):
    image_path: str
    pack_paths: list[str] = Field(min_length=1)
    gamma: float = 0.0
    epsilon: float = 0.1
    beta: float | None = None


class SessionInfo(BaseModel):
    id: str
    dims: list[int]
    num_labels: int | None = None
    beta: float
    gamma: float
    epsilon: float
    pack_m: int
    refreshed: bool


class ParamsRequest(BaseModel):
    gamma: float | None = None
    beta: float | None = None
    epsilon: float | None = None


class ParamsResponse(BaseModel):
    refreshed: bool
    base_beta: float
    beta: float
    gamma: float
    epsilon: float


class Seed(BaseModel):
    index: int
    label: int


class SeedsRequest(BaseModel):
    seeds: list[Seed]
    adaptive: bool = True
    m_use: int | None = None


class SolveResponse(BaseModel):
    dims: list[int]
    num_labels: int
    labels_rle: list[tuple[int, int]]      # (label, run length), x-fastest
    max_prob_b64: str                      # u8 per voxel, base64
    m_use: int
    online_ms: float
    refreshed: bool
    base_beta: float


class ErrorBody(BaseModel):
    detail: str
