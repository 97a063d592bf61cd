"""Async job bookkeeping for avatar and chapter generation.

State moves strictly forward (pending -> running -> done | failed), so a
client polling a job id can never observe a regression.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass
from enum import Enum

from .errors import IllegalTransition, UnknownJob


class JobState(str, Enum):
    PENDING = "pending"
    RUNNING = "running"
    DONE = "done"
    FAILED = "failed"


_STATE_ORDER = {
    JobState.PENDING: 0,
    JobState.RUNNING: 1,
    JobState.DONE: 2,
    JobState.FAILED: 2,
}


@dataclass
class JobStatus:
    job_id: str
    kind: str
    state: JobState
    started_at: float
    finished_at: float | None = None
    result: dict | None = None
    error: dict | None = None  # {"kind", "message"}

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "kind": self.kind,
            "state": self.state.value,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "result": self.result,
            "error": self.error,
        }


class JobRegistry:
    def __init__(self, clock=time.time):
        self._clock = clock
        self._jobs: dict[str, JobStatus] = {}
        self._lock = threading.Lock()

    def create(self, kind: str) -> str:
        job_id = uuid.uuid4().hex
        with self._lock:
            self._jobs[job_id] = JobStatus(
                job_id=job_id, kind=kind, state=JobState.PENDING, started_at=self._clock()
            )
        return job_id

    def _advance(self, job_id: str, state: JobState, **updates) -> None:
        with self._lock:
            job = self._jobs.get(job_id)
            if job is None:
                raise UnknownJob(f"no job {job_id!r}")
            if _STATE_ORDER[state] < _STATE_ORDER[job.state]:
                raise IllegalTransition(
                    f"job {job_id} cannot move {job.state.value} -> {state.value}"
                )
            job.state = state
            for key, value in updates.items():
                setattr(job, key, value)

    def mark_running(self, job_id: str) -> None:
        self._advance(job_id, JobState.RUNNING)

    def mark_done(self, job_id: str, result: dict | None = None) -> None:
        self._advance(job_id, JobState.DONE, result=result, finished_at=self._clock())

    def mark_failed(self, job_id: str, kind: str, message: str) -> None:
        self._advance(
            job_id,
            JobState.FAILED,
            error={"kind": kind, "message": message},
            finished_at=self._clock(),
        )

    def get(self, job_id: str) -> dict:
        with self._lock:
            job = self._jobs.get(job_id)
            if job is None:
                raise UnknownJob(f"no job {job_id!r}")
            return job.to_dict()

    def fail_active(self, kind: str = "Shutdown", message: str = "service shut down") -> None:
        with self._lock:
            for job in self._jobs.values():
                if _STATE_ORDER[job.state] < 2:
                    job.state = JobState.FAILED
                    job.error = {"kind": kind, "message": message}
                    job.finished_at = self._clock()
