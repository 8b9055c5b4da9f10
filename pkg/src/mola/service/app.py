"""HTTP API over the sampling and editing pipeline."""

from __future__ import annotations

import json
import secrets
import threading

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response

from ..checkpoint import load_bundle_meta
from ..editing import EditSpec, EditSpecError, GuidanceConfig, guided_sample
from ..features import recover_global_joints
from ..motionfile import dumps_motion
from ..sampling import InferenceBundle, sample_text_to_motion
from ..text import TokenizerError
from .queue import JobQueue
from .schemas import (
    ActivateResponse,
    CheckpointInfo,
    EditRequest,
    GenerateRequest,
    JobListResponse,
    JobModel,
    SkeletonResponse,
)
from .store import WorkspaceStore


class Engine:
    """Loads serving bundles and executes jobs against a pinned checkpoint."""

    def __init__(self, store: WorkspaceStore, workers: int = 1):
        self.store = store
        self._bundles: dict[str, InferenceBundle] = {}
        self._paths: dict[str, str] = {}
        self._active: tuple[str, InferenceBundle] | None = None
        self._lock = threading.Lock()
        self.queue = JobQueue(store, self._execute, workers=workers)
        self.refresh_checkpoints()

    def refresh_checkpoints(self) -> list[str]:
        for path in self.store.checkpoint_dirs():
            try:
                meta = load_bundle_meta(path)
            except Exception:
                continue
            self._paths[meta["id"]] = path
        return sorted(self._paths)

    def get_bundle(self, checkpoint_id: str) -> InferenceBundle:
        with self._lock:
            bundle = self._bundles.get(checkpoint_id)
        if bundle is not None:
            return bundle
        path = self._paths.get(checkpoint_id)
        if path is None:
            raise KeyError(checkpoint_id)
        bundle = InferenceBundle.load(path)
        with self._lock:
            self._bundles[checkpoint_id] = bundle
        return bundle

    def activate(self, checkpoint_id: str) -> None:
        bundle = self.get_bundle(checkpoint_id)
        # Single reference assignment: concurrent readers see either the old
        # or the new (id, bundle) pair, never a mix.
        self._active = (checkpoint_id, bundle)

    def active(self) -> tuple[str, InferenceBundle]:
        snapshot = self._active
        if snapshot is None:
            raise HTTPException(status_code=503, detail="no checkpoint activated")
        return snapshot

    def active_id(self) -> str | None:
        snapshot = self._active
        return snapshot[0] if snapshot else None

    # ----------------------------------------------------------- execution

    def _execute(self, job: dict) -> str:
        bundle = self.get_bundle(job["checkpoint_id"])
        request = job["request"]
        if job["kind"] == "generate":
            motion, meta = sample_text_to_motion(
                request["text"],
                job["seed"],
                bundle,
                cfg_scale=request.get("cfg_scale"),
                steps=request.get("steps"),
                delta=request.get("delta"),
            )
            payload = dumps_motion(motion, generator=meta)
        else:
            spec = EditSpec.from_dict(request["spec"])
            gcfg = GuidanceConfig.from_dict(request["spec"].get("guidance") or {})
            motion, info = guided_sample(spec, job["seed"], gcfg, bundle)
            payload = dumps_motion(
                motion,
                generator={
                    "seed": job["seed"],
                    "s": info["s"],
                    "S": info["S"],
                    "delta": info["delta"],
                    "checkpoint_id": bundle.checkpoint_id,
                    "edit_spec": request["spec"],
                },
            )
        self.store.write_motion_text(job["id"], payload)
        return job["id"]


def create_app(workspace: str, workers: int = 1, cors_origins: list[str] | None = None,
               activate_latest: bool = True) -> FastAPI:
    store = WorkspaceStore(workspace)
    engine = Engine(store, workers=workers)
    if activate_latest:
        ids = engine.refresh_checkpoints()
        if ids:
            engine.activate(ids[-1])

    app = FastAPI(title="motion generation service", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=cors_origins or ["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.engine = engine
    app.state.store = store

    def _draw_seed() -> int:
        return secrets.randbits(31)

    @app.post("/api/generate", response_model=JobModel, status_code=202)
    def generate(req: GenerateRequest):
        checkpoint_id, bundle = engine.active()
        try:
            bundle.text_encoder.tokenizer.encode(req.text, bundle.ldm_cfg.max_tokens)
        except TokenizerError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        seed = req.seed if req.seed is not None else _draw_seed()
        request = {"text": req.text, "cfg_scale": req.cfg_scale, "steps": req.steps, "delta": req.delta}
        job = engine.queue.submit("generate", request, seed, checkpoint_id, req.idempotency_key)
        return job

    @app.post("/api/edit", response_model=JobModel, status_code=202)
    def edit(req: EditRequest):
        checkpoint_id, bundle = engine.active()
        spec_dict = req.spec.model_dump()
        mask = np.asarray(spec_dict["mask"])
        if mask.size == 0 or mask.sum() == 0:
            raise HTTPException(status_code=400, detail="mask selects no entries")
        try:
            spec = EditSpec.from_dict(spec_dict)
        except EditSpecError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        if spec.n_frames != bundle.vae_cfg.seq_len or spec.n_joints != bundle.skeleton.n_joints:
            raise HTTPException(
                status_code=422,
                detail=f"spec grid {spec.n_joints}x{spec.n_frames} does not match model "
                       f"{bundle.skeleton.n_joints}x{bundle.vae_cfg.seq_len}",
            )
        try:
            bundle.text_encoder.tokenizer.encode(spec.text, bundle.ldm_cfg.max_tokens)
        except TokenizerError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        seed = req.seed if req.seed is not None else _draw_seed()
        job = engine.queue.submit("edit", {"spec": spec_dict}, seed, checkpoint_id, req.idempotency_key)
        return job

    @app.get("/api/jobs/{job_id}", response_model=JobModel)
    def get_job(job_id: str):
        job = store.read_job(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail="unknown job")
        return job

    @app.get("/api/jobs", response_model=JobListResponse)
    def list_jobs(cursor: str | None = None, limit: int = 50):
        ids = store.list_job_ids()
        if cursor is not None:
            ids = [i for i in ids if i > cursor]
        page = ids[:limit]
        jobs = [store.read_job(i) for i in page]
        next_cursor = page[-1] if len(ids) > limit else None
        return {"jobs": [j for j in jobs if j], "next_cursor": next_cursor}

    @app.get("/api/motions/{motion_id}")
    def get_motion(motion_id: str):
        text = store.read_motion_text(motion_id)
        if text is None:
            raise HTTPException(status_code=404, detail="unknown motion")
        doc = json.loads(text)
        feats = np.asarray(doc["features"], dtype=np.float32)[: doc["length"]]
        joints = recover_global_joints(feats, doc["n_joints"])
        doc["global_joints"] = [frame.reshape(-1).tolist() for frame in joints]
        return JSONResponse(doc)

    @app.get("/api/motions/{motion_id}/file")
    def get_motion_file(motion_id: str):
        text = store.read_motion_text(motion_id)
        if text is None:
            raise HTTPException(status_code=404, detail="unknown motion")
        return Response(content=text, media_type="application/json")

    @app.get("/api/checkpoints", response_model=list[CheckpointInfo])
    def list_checkpoints():
        ids = engine.refresh_checkpoints()
        active = engine.active_id()
        return [CheckpointInfo(id=i, path=engine._paths[i], active=i == active) for i in ids]

    @app.post("/api/checkpoints/{checkpoint_id}/activate", response_model=ActivateResponse)
    def activate(checkpoint_id: str):
        engine.refresh_checkpoints()
        try:
            engine.activate(checkpoint_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown checkpoint")
        return {"active": checkpoint_id}

    @app.get("/api/skeleton", response_model=SkeletonResponse)
    def skeleton():
        checkpoint_id, bundle = engine.active()
        return {
            "checkpoint_id": checkpoint_id,
            "skeleton": bundle.skeleton.to_dict(),
            "seq_len": bundle.vae_cfg.seq_len,
        }

    @app.get("/api/spec")
    def openapi_spec():
        return JSONResponse(app.openapi())

    return app
