"""Grading service: bounded job queue, worker pool, HTTP API.

The service owns built course bundles, a persistent Store, and an executor
factory. Submissions are parsed up front, archived, queued, and graded
asynchronously by a small worker pool; each job runs in its own executor
session. The HTTP layer is a thin FastAPI app over the same core object, so
tests can drive the core directly or through the wire.
"""

from __future__ import annotations

import queue
import socket
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

import yaml
from fastapi import Depends, FastAPI, HTTPException, Request, Response
from fastapi.responses import HTMLResponse, JSONResponse

from .course import SequenceBundle, build_sequence, bundle_manifest_json, load_manifest
from .errors import (
    BindFailure,
    DuplicateId,
    InvalidConfig,
    MalformedSubmission,
    NbCampusError,
    QueueFull,
    UnknownAssignment,
)
from .executor import (
    ExecutorSupervisor,
    ScriptedExecutor,
    default_environments,
    worker_available,
)
from .grading import AssignmentSpec, ExecutionLimits, sanitize_and_grade
from .notebook import Notebook, parse_notebook, serialize_notebook
from .store import JobRecord, Store

DEFAULT_QUEUE_SIZE = 100
DEFAULT_WORKERS = 2

ExecutorFactory = Callable[[str], Any]  # environment name -> session with execute/shutdown


def fake_executor_factory(environment: str) -> ScriptedExecutor:
    """Always-passing stand-in used when no worker runtime is installed."""
    return ScriptedExecutor()


def subprocess_executor_factory(environments=None) -> ExecutorFactory:
    supervisor = ExecutorSupervisor(environments)
    return supervisor.start_session


def resolve_executor_factory(name: str) -> ExecutorFactory:
    if name == "fake":
        return fake_executor_factory
    if name == "subprocess":
        return subprocess_executor_factory()
    if name == "auto":
        if worker_available():
            return subprocess_executor_factory(default_environments())
        return fake_executor_factory
    raise InvalidConfig(f"unknown executor kind {name!r}")


@dataclass(frozen=True)
class _QueuedJob:
    job_id: str
    submission_id: str
    course_id: str
    assignment_id: str
    user_id: str
    notebook: Notebook
    spec: AssignmentSpec
    limits: ExecutionLimits


class GradingService:
    """Queue, worker pool, and course/assignment lookup around one Store."""

    def __init__(
        self,
        bundles: Mapping[str, SequenceBundle] | list[SequenceBundle],
        store: Store,
        executor_factory: ExecutorFactory = fake_executor_factory,
        *,
        queue_size: int = DEFAULT_QUEUE_SIZE,
        workers: int = DEFAULT_WORKERS,
        default_limits: ExecutionLimits = ExecutionLimits(),
    ):
        if isinstance(bundles, Mapping):
            bundle_list = list(bundles.values())
        else:
            bundle_list = list(bundles)
        self.bundles: dict[str, SequenceBundle] = {}
        self._units: dict[str, tuple[str, Any]] = {}
        self._assignments: dict[str, tuple[str, AssignmentSpec, ExecutionLimits]] = {}
        for bundle in bundle_list:
            if bundle.course_id in self.bundles:
                raise DuplicateId(f"course_id {bundle.course_id!r} loaded twice")
            self.bundles[bundle.course_id] = bundle
            for unit in bundle.units:
                if unit.unit_id in self._units:
                    raise DuplicateId(f"unit_id {unit.unit_id!r} appears in two courses")
                self._units[unit.unit_id] = (bundle.course_id, unit)
                if unit.assignment is not None:
                    limits = default_limits
                    if unit.time_limit_s is not None:
                        limits = ExecutionLimits(default_limits.cell_timeout_s,
                                                 unit.time_limit_s)
                    self._assignments[unit.unit_id] = (bundle.course_id, unit.assignment,
                                                       limits)
        self.store = store
        self._executor_factory = executor_factory
        self._queue: queue.Queue = queue.Queue(maxsize=max(1, queue_size))
        self._submit_lock = threading.Lock()
        self._closed = False
        self._threads = [
            threading.Thread(target=self._drain, name=f"grader-{i}", daemon=True)
            for i in range(max(1, workers))
        ]
        for t in self._threads:
            t.start()

    # --- submissions -----------------------------------------------------------

    def submit(self, assignment_id: str, user_id: str, content: bytes) -> str:
        found = self._assignments.get(assignment_id)
        if found is None:
            raise UnknownAssignment(f"no assignment registered as {assignment_id!r}")
        course_id, spec, limits = found
        try:
            nb = parse_notebook(content)
        except NbCampusError as exc:
            raise MalformedSubmission(f"submission does not parse: {exc}") from exc
        with self._submit_lock:
            if self._closed:
                raise QueueFull("service is shutting down")
            if self._queue.full():
                raise QueueFull(
                    f"grading queue is at capacity ({self._queue.maxsize} jobs)")
            submission_id = uuid.uuid4().hex
            self.store.record_submission(submission_id, course_id, assignment_id,
                                         user_id, content)
            job_id = uuid.uuid4().hex
            self.store.record_job_state(job_id, submission_id, "queued")
            self._queue.put_nowait(_QueuedJob(job_id, submission_id, course_id,
                                              assignment_id, user_id, nb, spec, limits))
        return job_id

    def _drain(self) -> None:
        while True:
            item = self._queue.get()
            if item is None:
                return
            self._run_job(item)

    def _run_job(self, job: _QueuedJob) -> None:
        self.store.record_job_state(job.job_id, job.submission_id, "running")
        try:
            session = self._executor_factory(job.spec.environment)
        except NbCampusError as exc:
            self.store.record_job_state(job.job_id, job.submission_id, "failed",
                                        error=f"no executor session: {exc}")
            return
        try:
            report = sanitize_and_grade(job.notebook, job.spec, session, job.limits)
        except NbCampusError as exc:
            self.store.record_job_state(job.job_id, job.submission_id, "failed",
                                        error=str(exc))
            return
        finally:
            try:
                session.shutdown()
            except Exception:
                pass
        self.store.record_report(job.job_id, report)
        self.store.record_job_state(job.job_id, job.submission_id, "done")
        self.store.record_score(job.job_id, job.course_id, job.assignment_id,
                                job.user_id, job.submission_id, report)

    # --- queries -------------------------------------------------------------------

    def job(self, job_id: str) -> JobRecord | None:
        return self.store.job(job_id)

    def courses(self) -> list[dict[str, Any]]:
        return [{"course_id": b.course_id, "title": b.title}
                for b in self.bundles.values()]

    def sequence(self, course_id: str) -> dict[str, Any] | None:
        bundle = self.bundles.get(course_id)
        return None if bundle is None else bundle_manifest_json(bundle)

    def unit_html(self, unit_id: str) -> str | None:
        found = self._units.get(unit_id)
        return None if found is None else found[1].html

    def release_bytes(self, assignment_id: str) -> bytes | None:
        found = self._units.get(assignment_id)
        if found is None or found[1].released is None:
            return None
        return serialize_notebook(found[1].released)

    def gradebook(self, course_id: str, user_id: str) -> list[dict[str, Any]]:
        return [e.to_json() for e in self.store.entries_for(course_id, user_id)]

    def shutdown(self) -> None:
        """Stop accepting work, finish everything already queued, join workers."""
        with self._submit_lock:
            if self._closed:
                return
            self._closed = True
        for _ in self._threads:
            self._queue.put(None)
        for t in self._threads:
            t.join()


# --- HTTP layer ----------------------------------------------------------------------

def create_app(service: GradingService, *, tokens: Mapping[str, Mapping[str, str]] | None = None,
               static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="course grading service", docs_url=None, redoc_url=None,
                  openapi_url=None)
    token_table = {t: dict(p) for t, p in tokens.items()} if tokens else None

    async def principal(request: Request) -> dict[str, str] | None:
        if token_table is None:
            return None
        header = request.headers.get("authorization", "")
        if not header.lower().startswith("bearer "):
            raise HTTPException(status_code=401, detail="bearer token required")
        entry = token_table.get(header[7:].strip())
        if entry is None:
            raise HTTPException(status_code=401, detail="unknown token")
        return entry

    @app.get("/api/courses")
    async def list_courses(who=Depends(principal)):
        return service.courses()

    @app.get("/api/courses/{course_id}/sequence")
    async def course_sequence(course_id: str, who=Depends(principal)):
        seq = service.sequence(course_id)
        if seq is None:
            raise HTTPException(status_code=404, detail=f"unknown course {course_id!r}")
        return seq

    @app.get("/api/units/{unit_id}/html")
    async def unit_html(unit_id: str, who=Depends(principal)):
        html = service.unit_html(unit_id)
        if html is None:
            raise HTTPException(status_code=404, detail=f"unknown unit {unit_id!r}")
        return HTMLResponse(html)

    @app.get("/api/assignments/{assignment_id}/release")
    async def release(assignment_id: str, who=Depends(principal)):
        content = service.release_bytes(assignment_id)
        if content is None:
            raise HTTPException(status_code=404,
                                detail=f"unknown assignment {assignment_id!r}")
        return Response(
            content,
            media_type="application/x-ipynb+json",
            headers={"Content-Disposition":
                     f'attachment; filename="{assignment_id}.ipynb"'},
        )

    @app.post("/api/assignments/{assignment_id}/submissions", status_code=202)
    async def submit(assignment_id: str, request: Request,
                     user_id: str = "anonymous", who=Depends(principal)):
        if who is not None:
            user_id = who.get("user_id", user_id)
        body = await request.body()
        try:
            job_id = service.submit(assignment_id, user_id, body)
        except UnknownAssignment as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        except MalformedSubmission as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        except QueueFull as exc:
            raise HTTPException(status_code=429, detail=str(exc)) from exc
        return {"job_id": job_id}

    @app.get("/api/jobs/{job_id}")
    async def job_status(job_id: str, who=Depends(principal)):
        job = service.job(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id!r}")
        return JSONResponse(job.to_json())

    @app.get("/api/gradebook/{course_id}/{user_id}")
    async def gradebook(course_id: str, user_id: str, who=Depends(principal)):
        if who is not None and who.get("role") == "student" \
                and who.get("user_id") != user_id:
            raise HTTPException(status_code=403, detail="students see only their own scores")
        return {"entries": service.gradebook(course_id, user_id)}

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="static")

    return app


# --- configuration ------------------------------------------------------------------

@dataclass(frozen=True)
class CourseSource:
    manifest: Path
    base_dir: Path | None = None


@dataclass(frozen=True)
class ServiceConfig:
    data_dir: Path
    courses: tuple[CourseSource, ...]
    host: str = "127.0.0.1"
    port: int = 8000
    queue_size: int = DEFAULT_QUEUE_SIZE
    workers: int = DEFAULT_WORKERS
    policy: str = "latest"
    executor: str = "auto"
    tokens: Mapping[str, Mapping[str, str]] | None = None
    static_dir: Path | None = None
    limits: ExecutionLimits = field(default_factory=ExecutionLimits)


def load_config(path: str | Path) -> ServiceConfig:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as exc:
        raise InvalidConfig(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, Mapping):
        raise InvalidConfig("config root must be a mapping")
    known = {"data_dir", "courses", "host", "port", "queue_size", "workers",
             "policy", "executor", "tokens", "static_dir",
             "cell_timeout_s", "total_timeout_s"}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise InvalidConfig(f"unknown config key(s): {', '.join(unknown)}")
    if "data_dir" not in doc:
        raise InvalidConfig("config needs data_dir")
    courses_obj = doc.get("courses")
    if not isinstance(courses_obj, list) or not courses_obj:
        raise InvalidConfig("config needs a non-empty courses list")
    base = path.parent
    courses = []
    for entry in courses_obj:
        if isinstance(entry, str):
            entry = {"manifest": entry}
        if not isinstance(entry, Mapping) or "manifest" not in entry:
            raise InvalidConfig("each course needs a manifest path")
        manifest = base / str(entry["manifest"])
        base_dir = entry.get("base_dir")
        courses.append(CourseSource(manifest,
                                    base / str(base_dir) if base_dir else manifest.parent))
    policy = doc.get("policy", "latest")
    if policy not in ("latest", "best"):
        raise InvalidConfig(f"policy must be latest or best, not {policy!r}")
    executor = doc.get("executor", "auto")
    if executor not in ("fake", "subprocess", "auto"):
        raise InvalidConfig(f"executor must be fake, subprocess, or auto, not {executor!r}")
    tokens = doc.get("tokens")
    if tokens is not None:
        if not isinstance(tokens, Mapping) or not all(
                isinstance(v, Mapping) and "user_id" in v for v in tokens.values()):
            raise InvalidConfig("tokens must map token -> {user_id, role}")
    static_dir = doc.get("static_dir")
    try:
        port = int(doc.get("port", 8000))
        queue_size = int(doc.get("queue_size", DEFAULT_QUEUE_SIZE))
        workers = int(doc.get("workers", DEFAULT_WORKERS))
        limits = ExecutionLimits(
            float(doc.get("cell_timeout_s", ExecutionLimits().cell_timeout_s)),
            float(doc.get("total_timeout_s", ExecutionLimits().total_timeout_s)),
        )
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(f"numeric config field is not numeric: {exc}") from exc
    return ServiceConfig(
        data_dir=base / str(doc["data_dir"]),
        courses=tuple(courses),
        host=str(doc.get("host", "127.0.0.1")),
        port=port,
        queue_size=queue_size,
        workers=workers,
        policy=policy,
        executor=executor,
        tokens=tokens,
        static_dir=base / str(static_dir) if static_dir else None,
        limits=limits,
    )


def build_service(config: ServiceConfig) -> GradingService:
    bundles = []
    for source in config.courses:
        manifest = load_manifest(source.manifest)
        bundles.append(build_sequence(manifest, base_dir=source.base_dir))
    store = Store(config.data_dir, policy=config.policy)
    return GradingService(
        bundles, store, resolve_executor_factory(config.executor),
        queue_size=config.queue_size, workers=config.workers,
        default_limits=config.limits,
    )


def serve(config: ServiceConfig) -> None:
    """Blocking entry point: build the service and run the HTTP server."""
    import uvicorn

    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((config.host, config.port))
    except OSError as exc:
        raise BindFailure(f"cannot bind {config.host}:{config.port}: {exc}") from exc
    finally:
        probe.close()

    service = build_service(config)
    app = create_app(service, tokens=config.tokens, static_dir=config.static_dir)
    try:
        uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    finally:
        service.shutdown()
        service.store.close()
