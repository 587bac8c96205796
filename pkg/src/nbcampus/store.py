"""Durable state for the grading service: event log plus derived indexes.

Everything that must survive a restart is an appended JSONL event
(submissions, job state transitions, reports, score recordings); the
in-memory job table and gradebook are replayed from the log on startup.
Scores are recorded at most once per job_id, enforced both at runtime and
during replay, so a crash between "done" and "score" cannot double-count.
Jobs found queued or running during replay were interrupted by the previous
shutdown and are marked failed.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

from .grading import GradeReport

_STATE_RANK = {"queued": 0, "running": 1, "done": 2, "failed": 2}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass(frozen=True)
class SubmissionRecord:
    submission_id: str
    course_id: str
    assignment_id: str
    user_id: str
    path: str
    received_at: str


@dataclass(frozen=True)
class JobRecord:
    job_id: str
    submission_id: str
    state: str = "queued"
    report: GradeReport | None = None
    error: str | None = None
    transitions: tuple[tuple[str, str], ...] = ()

    def to_json(self) -> dict:
        return {
            "job_id": self.job_id,
            "submission_id": self.submission_id,
            "state": self.state,
            # Contract: a report is visible iff the job is done.
            "report": self.report.to_json() if self.state == "done" and self.report else None,
            "error": self.error,
        }


@dataclass(frozen=True)
class GradebookEntry:
    course_id: str
    assignment_id: str
    user_id: str
    score: float
    earned: float
    possible: float
    submission_id: str
    recorded_at: str
    policy: str

    def to_json(self) -> dict:
        return {
            "course_id": self.course_id,
            "assignment_id": self.assignment_id,
            "user_id": self.user_id,
            "score": self.score,
            "earned": self.earned,
            "possible": self.possible,
            "submission_id": self.submission_id,
            "recorded_at": self.recorded_at,
            "policy": self.policy,
        }


class Store:
    """Single-writer persistent state rooted at one directory."""

    def __init__(self, root: str | Path, policy: str = "latest"):
        if policy not in ("latest", "best"):
            raise ValueError(f"unknown gradebook policy {policy!r}")
        self.policy = policy
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "submissions").mkdir(exist_ok=True)
        self._log_path = self.root / "events.jsonl"
        self._lock = threading.RLock()
        self.jobs: dict[str, JobRecord] = {}
        self.submissions: dict[str, SubmissionRecord] = {}
        self.gradebook: dict[tuple[str, str, str], GradebookEntry] = {}
        self.score_history: list[GradebookEntry] = []
        self._scored_jobs: set[str] = set()
        self._replay()
        self._log = open(self._log_path, "a", encoding="utf-8")
        self._fail_interrupted()

    # --- event plumbing ---------------------------------------------------

    def _append(self, obj: dict) -> None:
        line = json.dumps(obj, sort_keys=True)
        self._log.write(line + "\n")
        self._log.flush()
        os.fsync(self._log.fileno())

    def _replay(self) -> None:
        if not self._log_path.exists():
            return
        with open(self._log_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    event = json.loads(line)
                except json.JSONDecodeError:
                    continue  # torn final write from a crash
                self._apply(event)

    def _apply(self, event: dict) -> None:
        kind = event.get("type")
        if kind == "submission":
            rec = SubmissionRecord(
                event["submission_id"], event["course_id"], event["assignment_id"],
                event["user_id"], event["path"], event.get("ts", ""))
            self.submissions[rec.submission_id] = rec
        elif kind == "job":
            self._apply_job(event["job_id"], event["submission_id"],
                            event["state"], event.get("error"), event.get("ts", ""))
        elif kind == "report":
            job = self.jobs.get(event["job_id"])
            if job is not None:
                self.jobs[job.job_id] = replace(job, report=GradeReport.from_json(event["report"]))
        elif kind == "score":
            if event["job_id"] in self._scored_jobs:
                return
            self._scored_jobs.add(event["job_id"])
            entry = GradebookEntry(
                event["course_id"], event["assignment_id"], event["user_id"],
                event["score"], event["earned"], event["possible"],
                event["submission_id"], event.get("ts", ""), event["policy"])
            self._apply_policy(entry)

    def _apply_job(self, job_id: str, submission_id: str, state: str,
                   error: str | None, ts: str) -> None:
        current = self.jobs.get(job_id)
        if current is None:
            self.jobs[job_id] = JobRecord(job_id, submission_id, state, None, error,
                                          ((state, ts),))
            return
        if _STATE_RANK.get(state, -1) <= _STATE_RANK.get(current.state, -1):
            return  # transitions are monotone; ignore stale or replayed noise
        self.jobs[job_id] = replace(current, state=state, error=error,
                                    transitions=current.transitions + ((state, ts),))

    def _apply_policy(self, entry: GradebookEntry) -> None:
        self.score_history.append(entry)
        key = (entry.course_id, entry.assignment_id, entry.user_id)
        current = self.gradebook.get(key)
        if entry.policy == "best" and current is not None and entry.score <= current.score:
            return
        self.gradebook[key] = entry

    def _fail_interrupted(self) -> None:
        with self._lock:
            for job in list(self.jobs.values()):
                if job.state in ("queued", "running"):
                    self.record_job_state(job.job_id, job.submission_id, "failed",
                                          error="interrupted by service restart")

    # --- recording ----------------------------------------------------------

    def record_submission(self, submission_id: str, course_id: str, assignment_id: str,
                          user_id: str, content: bytes) -> SubmissionRecord:
        with self._lock:
            rel = f"submissions/{submission_id}.ipynb"
            (self.root / rel).write_bytes(content)
            ts = _now()
            self._append({"type": "submission", "submission_id": submission_id,
                          "course_id": course_id, "assignment_id": assignment_id,
                          "user_id": user_id, "path": rel, "ts": ts})
            rec = SubmissionRecord(submission_id, course_id, assignment_id, user_id, rel, ts)
            self.submissions[submission_id] = rec
            return rec

    def submission_bytes(self, submission_id: str) -> bytes | None:
        rec = self.submissions.get(submission_id)
        if rec is None:
            return None
        return (self.root / rec.path).read_bytes()

    def record_job_state(self, job_id: str, submission_id: str, state: str,
                         error: str | None = None) -> JobRecord:
        if state not in _STATE_RANK:
            raise ValueError(f"unknown job state {state!r}")
        with self._lock:
            ts = _now()
            self._append({"type": "job", "job_id": job_id, "submission_id": submission_id,
                          "state": state, "error": error, "ts": ts})
            self._apply_job(job_id, submission_id, state, error, ts)
            return self.jobs[job_id]

    def record_report(self, job_id: str, report: GradeReport) -> None:
        with self._lock:
            self._append({"type": "report", "job_id": job_id, "report": report.to_json(),
                          "ts": _now()})
            job = self.jobs.get(job_id)
            if job is not None:
                self.jobs[job_id] = replace(job, report=report)

    def record_score(self, job_id: str, course_id: str, assignment_id: str, user_id: str,
                     submission_id: str, report: GradeReport) -> GradebookEntry | None:
        """Idempotent per job_id; returns the entry, or None when already recorded."""
        with self._lock:
            if job_id in self._scored_jobs:
                return None
            self._scored_jobs.add(job_id)
            score = report.earned / report.possible if report.possible else 0.0
            entry = GradebookEntry(course_id, assignment_id, user_id, score,
                                   report.earned, report.possible, submission_id,
                                   _now(), self.policy)
            self._append({"type": "score", "job_id": job_id, "course_id": course_id,
                          "assignment_id": assignment_id, "user_id": user_id,
                          "submission_id": submission_id, "score": score,
                          "earned": report.earned, "possible": report.possible,
                          "policy": self.policy, "ts": entry.recorded_at})
            self._apply_policy(entry)
            return entry

    # --- queries ---------------------------------------------------------------

    def job(self, job_id: str) -> JobRecord | None:
        with self._lock:
            return self.jobs.get(job_id)

    def entries_for(self, course_id: str, user_id: str) -> list[GradebookEntry]:
        with self._lock:
            return sorted(
                (e for (c, _a, u), e in self.gradebook.items()
                 if c == course_id and u == user_id),
                key=lambda e: e.assignment_id,
            )

    def close(self) -> None:
        with self._lock:
            if not self._log.closed:
                self._log.close()
