"""In-process job queue with a small worker pool and pinned checkpoints."""

from __future__ import annotations

import queue
import threading
import time
import traceback
from typing import Callable

from .store import WorkspaceStore, new_ulid


class JobQueue:
    """Jobs run on worker threads; status transitions are persisted
    queued -> running -> done|failed, each committed before it is visible."""

    def __init__(self, store: WorkspaceStore, handler: Callable[[dict], str], workers: int = 1):
        self.store = store
        self.handler = handler
        self._queue: queue.Queue[str] = queue.Queue()
        self._idempotency: dict[str, str] = {}
        self._lock = threading.Lock()
        self._threads = [
            threading.Thread(target=self._worker, name=f"job-worker-{i}", daemon=True) for i in range(workers)
        ]
        for t in self._threads:
            t.start()

    def submit(self, kind: str, request: dict, seed: int, checkpoint_id: str,
               idempotency_key: str | None = None) -> dict:
        with self._lock:
            if idempotency_key:
                known = self._idempotency.get(idempotency_key)
                if known is None:
                    existing = self.store.find_by_idempotency_key(idempotency_key)
                    if existing:
                        known = existing["id"]
                        self._idempotency[idempotency_key] = known
                if known:
                    return self.store.read_job(known)
            job = {
                "id": new_ulid(),
                "kind": kind,
                "status": "queued",
                "request": request,
                "seed": seed,
                "checkpoint_id": checkpoint_id,
                "result_motion_id": None,
                "error": None,
                "timings": {"created": time.time(), "started": None, "finished": None},
                "idempotency_key": idempotency_key,
            }
            self.store.write_job(job)
            if idempotency_key:
                self._idempotency[idempotency_key] = job["id"]
        self._queue.put(job["id"])
        return job

    def _worker(self):
        while True:
            job_id = self._queue.get()
            if job_id is None:
                return
            job = self.store.read_job(job_id)
            if job is None:
                continue
            job["status"] = "running"
            job["timings"]["started"] = time.time()
            self.store.write_job(job)
            try:
                motion_id = self.handler(job)
                job["status"] = "done"
                job["result_motion_id"] = motion_id
            except Exception as exc:  # job failures are reported, not raised
                job["status"] = "failed"
                job["error"] = f"{type(exc).__name__}: {exc}"
                traceback.print_exc()
            job["timings"]["finished"] = time.time()
            self.store.write_job(job)
            self._queue.task_done()

    def wait_idle(self, timeout: float = 60.0) -> bool:
        """Block until every submitted job has finished (used by tests/CLI)."""
        deadline = time.time() + timeout
        while time.time() < deadline:
            if self._queue.unfinished_tasks == 0:
                return True
            time.sleep(0.02)
        return False
