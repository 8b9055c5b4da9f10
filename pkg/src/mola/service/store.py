"""Filesystem-backed workspace: checkpoints, motions, jobs and the index."""

from __future__ import annotations

import json
import os
import threading
import time

from ..motionfile import atomic_write_json, _atomic_write_text

_CROCKFORD = "0123456789ABCDEFGHJKMNPQRSTVWXYZ"


class UlidFactory:
    """Sortable 26-char ids; monotonic within the process."""

    def __init__(self):
        self._lock = threading.Lock()
        self._last_ms = -1
        self._last_rand = 0
        import random

        self._rng = random.Random()

    def __call__(self) -> str:
        with self._lock:
            ms = int(time.time() * 1000)
            if ms <= self._last_ms:
                ms = self._last_ms
                self._last_rand += 1
            else:
                self._last_ms = ms
                self._last_rand = self._rng.getrandbits(80)
            value = (ms << 80) | (self._last_rand & ((1 << 80) - 1))
            chars = []
            for _ in range(26):
                chars.append(_CROCKFORD[value & 0x1F])
                value >>= 5
            return "".join(reversed(chars))


new_ulid = UlidFactory()


class WorkspaceStore:
    """Write-then-rename persistence for jobs and motion files.

    A single writer lock serializes mutations; readers work off immutable
    committed files.  ``index.json`` summarizes committed entries and is
    rewritten atomically after every commit.
    """

    def __init__(self, root: str):
        self.root = os.path.abspath(root)
        for sub in ("checkpoints", "motions", "jobs", "datasets"):
            os.makedirs(os.path.join(self.root, sub), exist_ok=True)
        self._lock = threading.Lock()
        self._index = {"jobs": {}, "motions": {}}
        self._load_index()

    def _load_index(self):
        path = os.path.join(self.root, "index.json")
        if os.path.exists(path):
            with open(path, encoding="utf-8") as fh:
                self._index = json.load(fh)
            return
        # Rebuild from the filesystem if the index is missing.
        for name in os.listdir(os.path.join(self.root, "jobs")):
            if name.endswith(".json"):
                job = self.read_job(name[:-5])
                if job:
                    self._index["jobs"][job["id"]] = {"status": job["status"], "kind": job["kind"]}
        for name in os.listdir(os.path.join(self.root, "motions")):
            if name.endswith(".motion.json"):
                self._index["motions"][name[: -len(".motion.json")]] = {}
        self._write_index()

    def _write_index(self):
        atomic_write_json(os.path.join(self.root, "index.json"), self._index)

    # ------------------------------------------------------------- jobs

    def job_path(self, job_id: str) -> str:
        return os.path.join(self.root, "jobs", f"{job_id}.json")

    def write_job(self, job: dict) -> None:
        with self._lock:
            atomic_write_json(self.job_path(job["id"]), job)
            self._index["jobs"][job["id"]] = {"status": job["status"], "kind": job["kind"]}
            self._write_index()

    def read_job(self, job_id: str) -> dict | None:
        path = self.job_path(job_id)
        if not os.path.exists(path):
            return None
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)

    def list_job_ids(self) -> list[str]:
        with self._lock:
            return sorted(self._index["jobs"])

    def find_by_idempotency_key(self, key: str) -> dict | None:
        for job_id in self.list_job_ids():
            job = self.read_job(job_id)
            if job and job.get("idempotency_key") == key:
                return job
        return None

    # ---------------------------------------------------------- motions

    def motion_path(self, motion_id: str) -> str:
        return os.path.join(self.root, "motions", f"{motion_id}.motion.json")

    def write_motion_text(self, motion_id: str, payload: str) -> None:
        with self._lock:
            _atomic_write_text(self.motion_path(motion_id), payload)
            self._index["motions"][motion_id] = {}
            self._write_index()

    def read_motion_text(self, motion_id: str) -> str | None:
        path = self.motion_path(motion_id)
        if not os.path.exists(path):
            return None
        with open(path, encoding="utf-8") as fh:
            return fh.read()

    # ------------------------------------------------------- checkpoints

    def checkpoint_dirs(self) -> list[str]:
        base = os.path.join(self.root, "checkpoints")
        return sorted(
            os.path.join(base, d) for d in os.listdir(base) if os.path.exists(os.path.join(base, d, "meta.json"))
        )
