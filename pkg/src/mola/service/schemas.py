"""Request/response models for the HTTP API."""

from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, Field


class GuidanceModel(BaseModel):
    rho: float = 0.1
    step_mode: Literal["normalized", "constant"] = "normalized"
    time_travel: Optional[list[int]] = None
    tail_fraction: float = 0.25
    tail_repeats: int = 2
    cfg_scale: Optional[float] = None
    steps: Optional[int] = None
    delta: Optional[float] = None


class GenerateRequest(BaseModel):
    text: str
    seed: Optional[int] = None
    cfg_scale: Optional[float] = None
    steps: Optional[int] = Field(default=None, ge=1)
    delta: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    idempotency_key: Optional[str] = None


class EditSpecModel(BaseModel):
    task: Literal["path_following", "in_betweening", "upper_body"]
    text: str
    mask: list[list[int]]
    targets: list[list[list[float]]]
    guidance: Optional[GuidanceModel] = None


class EditRequest(BaseModel):
    spec: EditSpecModel
    seed: Optional[int] = None
    idempotency_key: Optional[str] = None


class JobTimings(BaseModel):
    created: float
    started: Optional[float] = None
    finished: Optional[float] = None


class JobModel(BaseModel):
    id: str
    kind: Literal["generate", "edit"]
    status: Literal["queued", "running", "done", "failed"]
    request: dict[str, Any]
    seed: int
    checkpoint_id: str
    result_motion_id: Optional[str] = None
    error: Optional[str] = None
    timings: JobTimings
    idempotency_key: Optional[str] = None


class JobListResponse(BaseModel):
    jobs: list[JobModel]
    next_cursor: Optional[str] = None


class CheckpointInfo(BaseModel):
    id: str
    path: str
    active: bool


class SkeletonResponse(BaseModel):
    checkpoint_id: str
    skeleton: dict[str, Any]
    seq_len: int


class ActivateResponse(BaseModel):
    active: str
