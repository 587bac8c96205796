from __future__ import annotations

import json
import threading
import time

import pytest
from fastapi.testclient import TestClient

from conftest import FIXTURES, GOOD_IMPLS, PARTIAL_IMPLS, course_rules, fill_solutions
from nbcampus.course import build_sequence, load_manifest
from nbcampus.errors import (
    InvalidConfig,
    MalformedSubmission,
    QueueFull,
    UnknownAssignment,
)
from nbcampus.executor import ScriptedExecutor
from nbcampus.grading import ExecutionLimits
from nbcampus.notebook import parse_notebook, serialize_notebook
from nbcampus.service import (
    GradingService,
    ServiceConfig,
    build_service,
    create_app,
    load_config,
    resolve_executor_factory,
)
from nbcampus.store import Store


@pytest.fixture(scope="module")
def bundle():
    return build_sequence(load_manifest(FIXTURES / "course.yaml"), base_dir=FIXTURES)


@pytest.fixture()
def service(bundle, tmp_path):
    svc = GradingService(
        [bundle], Store(tmp_path / "data"),
        lambda env: ScriptedExecutor(course_rules()),
    )
    yield svc
    svc.shutdown()
    svc.store.close()


def submission_bytes(service: GradingService, impls) -> bytes:
    released = parse_notebook(service.release_bytes("hw-functions"))
    return serialize_notebook(fill_solutions(released, impls))


def wait_done(service: GradingService, job_id: str, timeout: float = 10.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        job = service.job(job_id)
        if job is not None and job.state in ("done", "failed"):
            return job
        time.sleep(0.005)
    raise AssertionError(f"job {job_id} did not reach a terminal state")


class BlockingExecutor:
    """Session that parks until released; lets tests hold the queue busy."""

    def __init__(self, gate: threading.Event):
        self._gate = gate

    def execute(self, code, timeout_ms=None):
        self._gate.wait()
        return ScriptedExecutor().execute(code)

    def shutdown(self):
        pass


# --- core -----------------------------------------------------------------------

def test_submit_and_grade_full_marks(service):
    job_id = service.submit("hw-functions", "alice", submission_bytes(service, GOOD_IMPLS))
    job = wait_done(service, job_id)
    assert job.state == "done"
    assert job.report.earned == 15.0
    assert not job.report.tampered
    assert [s for s, _ in job.transitions] == ["queued", "running", "done"]
    entries = service.gradebook("eng-py", "alice")
    assert len(entries) == 1
    assert entries[0]["score"] == 1.0


def test_submit_and_grade_partial(service):
    job_id = service.submit("hw-functions", "bob", submission_bytes(service, PARTIAL_IMPLS))
    job = wait_done(service, job_id)
    assert job.report.earned == 5.0
    rows = {r.grade_id: r for r in job.report.rows}
    assert rows["q1"].passed and not rows["q2"].passed
    assert rows["q2"].message == "AssertionError: assert mul(2, 3) == 6"
    assert service.gradebook("eng-py", "bob")[0]["score"] == pytest.approx(1 / 3)


def test_submit_unknown_assignment(service):
    with pytest.raises(UnknownAssignment):
        service.submit("no-such-hw", "alice", b"{}")


def test_submit_malformed_bytes(service):
    with pytest.raises(MalformedSubmission):
        service.submit("hw-functions", "alice", b"not a notebook")


def test_queue_bound_rejects_excess(bundle, tmp_path):
    gate = threading.Event()
    svc = GradingService([bundle], Store(tmp_path / "q"),
                         lambda env: BlockingExecutor(gate),
                         queue_size=1, workers=1)
    try:
        sub = submission_bytes(svc, GOOD_IMPLS)
        first = svc.submit("hw-functions", "u1", sub)   # occupies the worker
        time.sleep(0.1)
        second = svc.submit("hw-functions", "u2", sub)  # fills the queue slot
        with pytest.raises(QueueFull):
            svc.submit("hw-functions", "u3", sub)
        gate.set()
        assert wait_done(svc, first).state == "done"
        assert wait_done(svc, second).state == "done"
    finally:
        gate.set()
        svc.shutdown()
        svc.store.close()


def test_graceful_shutdown_finishes_queued_work(bundle, tmp_path):
    svc = GradingService([bundle], Store(tmp_path / "g"),
                         lambda env: ScriptedExecutor(course_rules()), workers=2)
    sub = submission_bytes(svc, GOOD_IMPLS)
    jobs = [svc.submit("hw-functions", f"u{i}", sub) for i in range(6)]
    svc.shutdown()
    states = {svc.job(j).state for j in jobs}
    assert states == {"done"}
    with pytest.raises(QueueFull):
        svc.submit("hw-functions", "late", sub)
    svc.store.close()


def test_restart_preserves_scores_and_jobs(bundle, tmp_path):
    data = tmp_path / "data"
    svc = GradingService([bundle], Store(data),
                         lambda env: ScriptedExecutor(course_rules()))
    job_id = svc.submit("hw-functions", "alice", submission_bytes(svc, GOOD_IMPLS))
    wait_done(svc, job_id)
    svc.shutdown()
    svc.store.close()

    revived = GradingService([bundle], Store(data),
                             lambda env: ScriptedExecutor(course_rules()))
    try:
        job = revived.job(job_id)
        assert job.state == "done"
        assert job.report.earned == 15.0
        assert revived.gradebook("eng-py", "alice")[0]["score"] == 1.0
        assert len(revived.store.score_history) == 1  # no double-recording
    finally:
        revived.shutdown()
        revived.store.close()


def test_executor_failure_marks_job_failed(bundle, tmp_path):
    def broken_factory(env):
        raise UnknownAssignment("boom")  # any NbCampusError

    svc = GradingService([bundle], Store(tmp_path / "f"), broken_factory)
    try:
        job_id = svc.submit("hw-functions", "alice", submission_bytes_static(bundle))
        job = wait_done(svc, job_id)
        assert job.state == "failed"
        assert "boom" in job.error
        assert job.to_json()["report"] is None
    finally:
        svc.shutdown()
        svc.store.close()


def submission_bytes_static(bundle) -> bytes:
    released = bundle.unit("hw-functions").released
    return serialize_notebook(fill_solutions(released, GOOD_IMPLS))


# --- HTTP API ---------------------------------------------------------------------

@pytest.fixture()
def client(service):
    return TestClient(create_app(service))


def test_http_courses_and_sequence(client):
    courses = client.get("/api/courses").json()
    assert courses == [{"course_id": "eng-py",
                        "title": "Engineering computations in Python"}]
    seq = client.get("/api/courses/eng-py/sequence")
    assert seq.status_code == 200
    assert [u["unit_id"] for u in seq.json()["units"]] == [
        "arrays-basics", "arrays-plots", "hw-functions"]
    assert client.get("/api/courses/nope/sequence").status_code == 404


def test_http_unit_html(client):
    page = client.get("/api/units/arrays-basics/html")
    assert page.status_code == 200
    assert page.headers["content-type"].startswith("text/html")
    assert 'class="nb-notebook"' in page.text
    assert client.get("/api/units/ghost/html").status_code == 404


def test_http_release_download(client):
    resp = client.get("/api/assignments/hw-functions/release")
    assert resp.status_code == 200
    assert resp.headers["content-disposition"] == 'attachment; filename="hw-functions.ipynb"'
    nb = parse_notebook(resp.content)
    assert all("BEGIN SOLUTION" not in c.source for c in nb.cells)
    assert client.get("/api/assignments/arrays-basics/release").status_code == 404


def test_http_submission_flow(client, service):
    body = submission_bytes(service, PARTIAL_IMPLS)
    accepted = client.post(
        "/api/assignments/hw-functions/submissions?user_id=carol", content=body)
    assert accepted.status_code == 202
    job_id = accepted.json()["job_id"]

    deadline = time.monotonic() + 10
    while time.monotonic() < deadline:
        job = client.get(f"/api/jobs/{job_id}").json()
        if job["state"] in ("done", "failed"):
            break
        time.sleep(0.01)
    assert job["state"] == "done"
    assert job["report"]["earned"] == 5.0
    assert job["report"]["possible"] == 15.0

    book = client.get("/api/gradebook/eng-py/carol").json()
    assert len(book["entries"]) == 1
    assert book["entries"][0]["earned"] == 5.0


def test_http_submission_errors(client):
    assert client.post("/api/assignments/ghost/submissions",
                       content=b"{}").status_code == 404
    assert client.post("/api/assignments/hw-functions/submissions",
                       content=b"junk").status_code == 400
    assert client.get("/api/jobs/unknown").status_code == 404


def test_http_empty_gradebook_is_ok(client):
    assert client.get("/api/gradebook/eng-py/nobody").json() == {"entries": []}


def test_http_queue_full_maps_to_429(bundle, tmp_path):
    gate = threading.Event()
    svc = GradingService([bundle], Store(tmp_path / "q429"),
                         lambda env: BlockingExecutor(gate),
                         queue_size=1, workers=1)
    api = TestClient(create_app(svc))
    try:
        body = submission_bytes_static(bundle)
        api.post("/api/assignments/hw-functions/submissions", content=body)
        time.sleep(0.1)
        api.post("/api/assignments/hw-functions/submissions", content=body)
        rejected = api.post("/api/assignments/hw-functions/submissions", content=body)
        assert rejected.status_code == 429
    finally:
        gate.set()
        svc.shutdown()
        svc.store.close()


def test_http_bearer_tokens(service):
    tokens = {
        "tok-alice": {"user_id": "alice", "role": "student"},
        "tok-staff": {"user_id": "prof", "role": "instructor"},
    }
    api = TestClient(create_app(service, tokens=tokens))

    assert api.get("/api/courses").status_code == 401
    assert api.get("/api/courses",
                   headers={"Authorization": "Bearer wrong"}).status_code == 401

    alice = {"Authorization": "Bearer tok-alice"}
    staff = {"Authorization": "Bearer tok-staff"}
    assert api.get("/api/courses", headers=alice).status_code == 200

    # Submissions are attributed to the token's user, not the query string.
    body = submission_bytes(service, GOOD_IMPLS)
    accepted = api.post(
        "/api/assignments/hw-functions/submissions?user_id=mallory",
        content=body, headers=alice)
    assert accepted.status_code == 202
    wait_done(service, accepted.json()["job_id"])
    assert api.get("/api/gradebook/eng-py/alice",
                   headers=alice).json()["entries"][0]["user_id"] == "alice"

    assert api.get("/api/gradebook/eng-py/bob", headers=alice).status_code == 403
    assert api.get("/api/gradebook/eng-py/bob", headers=staff).status_code == 200


def test_http_static_mount(service, tmp_path):
    (tmp_path / "index.html").write_text("<h1>course shell</h1>")
    api = TestClient(create_app(service, static_dir=tmp_path))
    front = api.get("/")
    assert front.status_code == 200
    assert "course shell" in front.text
    assert api.get("/api/courses").status_code == 200


# --- config ------------------------------------------------------------------------

def write_config(tmp_path, **overrides) -> str:
    doc = {
        "data_dir": "data",
        "courses": [{"manifest": str(FIXTURES / "course.yaml"),
                     "base_dir": str(FIXTURES)}],
        "executor": "fake",
        **overrides,
    }
    path = tmp_path / "service.yaml"
    path.write_text(json.dumps(doc))
    return str(path)


def test_load_config_defaults(tmp_path):
    config = load_config(write_config(tmp_path))
    assert config.data_dir == tmp_path / "data"
    assert config.queue_size == 100 and config.workers == 2
    assert config.policy == "latest"
    assert config.courses[0].base_dir == FIXTURES


def test_load_config_rejects_unknown_keys(tmp_path):
    with pytest.raises(InvalidConfig):
        load_config(write_config(tmp_path, verbosity=3))


def test_load_config_rejects_bad_enum(tmp_path):
    with pytest.raises(InvalidConfig):
        load_config(write_config(tmp_path, policy="newest"))
    with pytest.raises(InvalidConfig):
        load_config(write_config(tmp_path, executor="magic"))


def test_load_config_requires_courses(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text('{"data_dir": "d", "courses": []}')
    with pytest.raises(InvalidConfig):
        load_config(path)


def test_build_service_from_config(tmp_path):
    config = load_config(write_config(tmp_path))
    svc = build_service(config)
    try:
        assert svc.sequence("eng-py") is not None
        job_id = svc.submit("hw-functions", "dana", submission_bytes(svc, GOOD_IMPLS))
        assert wait_done(svc, job_id).state == "done"  # fake executor passes all
    finally:
        svc.shutdown()
        svc.store.close()


def test_resolve_executor_factory_kinds():
    fake = resolve_executor_factory("fake")
    session = fake("default")
    assert isinstance(session, ScriptedExecutor)
    assert session.execute("anything").status == "ok"
    with pytest.raises(InvalidConfig):
        resolve_executor_factory("magic")
