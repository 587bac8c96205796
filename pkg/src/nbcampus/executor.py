"""Executor sessions: supervised worker subprocesses plus a scripted fake.

Wire protocol (newline-delimited JSON over stdin/stdout, UTF-8): the worker
writes ``{"hello": "executor", "version": 1}`` once at startup, then answers
each request line ``{"id", "code", "timeout_ms"}`` with exactly one response
line ``{"id", "status": "ok"|"error"|"timeout", "outputs": [...], "error":
{"ename", "evalue", "traceback"} | null}``. Output objects carry a "type"
key mirroring notebook output kinds, e.g. ``{"type": "stream", "name":
"stdout", "text": "4\\n"}``.

The supervisor enforces timeouts from outside: a request that produces no
response within ``timeout_ms`` plus a fixed grace is answered with status
"timeout", the worker process group is killed, and a fresh worker is spawned
inside the same session handle so later cells can still run (user-defined
names are lost at that point). Every execute call therefore returns within
timeout_ms + grace with some status.
"""

from __future__ import annotations

import importlib.util
import json
import os
import queue
import shlex
import shutil
import signal
import subprocess
import sys
import tempfile
import threading
import uuid
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from .errors import (
    ExecutorProtocolError,
    HandshakeTimeout,
    SessionClosed,
    SpawnFailure,
    UnknownEnvironment,
)
from .notebook import (
    Output,
    OutputKind,
    display_output,
    error_output,
    result_output,
    stream_output,
)

HANDSHAKE = {"hello": "executor", "version": 1}
DEFAULT_CELL_TIMEOUT_S = 30.0
DEFAULT_TOTAL_TIMEOUT_S = 300.0
SUPERVISION_GRACE_S = 5.0
WORKER_ENV_VAR = "NBCAMPUS_WORKER"

_EOF = object()  # reader-thread sentinel: worker stdout reached end of file


@dataclass(frozen=True)
class ExecResponse:
    status: str  # ok | error | timeout
    outputs: tuple[Output, ...] = ()
    error: dict[str, Any] | None = None


def output_from_wire(obj: Mapping[str, Any]) -> Output:
    kind = obj.get("type")
    if kind == "stream":
        return stream_output(str(obj.get("name", "stdout")), str(obj.get("text", "")))
    if kind == "execute_result":
        data = obj.get("data", {})
        if not isinstance(data, Mapping):
            raise ExecutorProtocolError("execute_result data must be a mapping")
        return result_output(dict(data))
    if kind == "display_data":
        data = obj.get("data", {})
        if not isinstance(data, Mapping):
            raise ExecutorProtocolError("display_data data must be a mapping")
        return display_output(dict(data))
    if kind == "error":
        tb = obj.get("traceback", [])
        tb = [str(t) for t in tb] if isinstance(tb, list) else []
        return error_output(str(obj.get("ename", "")), str(obj.get("evalue", "")), tb)
    raise ExecutorProtocolError(f"unknown output type {kind!r}")


def output_to_wire(output: Output) -> dict[str, Any]:
    if output.kind is OutputKind.STREAM:
        return {"type": "stream", "name": output.name, "text": output.text}
    if output.kind is OutputKind.ERROR:
        return {"type": "error", "ename": output.ename, "evalue": output.evalue,
                "traceback": list(output.traceback)}
    kind = "execute_result" if output.kind is OutputKind.EXECUTE_RESULT else "display_data"
    return {"type": kind, "data": output.data}


# --- scripted fake ----------------------------------------------------------

@dataclass(frozen=True)
class ScriptedRule:
    """One row of a code->response table.

    A rule matches when its ``exact`` or ``contains`` pattern matches the
    submitted code and all ``requires`` flags are set on the session. On
    match it may set session flags, letting one table answer the same test
    source differently depending on which answer cells ran before it.
    """

    contains: str | None = None
    exact: str | None = None
    status: str = "ok"
    stdout: str | None = None
    stderr: str | None = None
    result: str | None = None
    error: tuple[str, str] | None = None
    requires: frozenset[str] = frozenset()
    sets: frozenset[str] = frozenset()

    def matches(self, code: str, flags: set[str]) -> bool:
        if self.exact is not None and code != self.exact:
            return False
        if self.contains is not None and self.contains not in code:
            return False
        return self.requires <= flags


class ScriptedExecutor:
    """In-process fake session driven by a table of scripted rules."""

    def __init__(self, rules: Iterable[ScriptedRule] = (), default_status: str = "ok"):
        self.rules = tuple(rules)
        self.default_status = default_status
        self.flags: set[str] = set()
        self.calls: list[str] = []
        self._state = "ready"

    @property
    def state(self) -> str:
        return self._state

    def execute(self, code: str, timeout_ms: int | None = None) -> ExecResponse:
        if self._state == "closed":
            raise SessionClosed("scripted session is closed")
        self._state = "busy"
        try:
            self.calls.append(code)
            for rule in self.rules:
                if rule.matches(code, self.flags):
                    self.flags |= rule.sets
                    return self._respond(rule)
            return self._respond(ScriptedRule(status=self.default_status))
        finally:
            self._state = "ready"

    def _respond(self, rule: ScriptedRule) -> ExecResponse:
        outputs: list[Output] = []
        if rule.stdout is not None:
            outputs.append(stream_output("stdout", rule.stdout))
        if rule.stderr is not None:
            outputs.append(stream_output("stderr", rule.stderr))
        if rule.result is not None:
            outputs.append(result_output({"text/plain": rule.result}))
        if rule.status == "error":
            ename, evalue = rule.error or ("AssertionError", "")
            error = {"ename": ename, "evalue": evalue, "traceback": [f"{ename}: {evalue}"]}
            outputs.append(error_output(ename, evalue, error["traceback"]))
            return ExecResponse("error", tuple(outputs), error)
        if rule.status == "timeout":
            return ExecResponse("timeout", tuple(outputs), None)
        return ExecResponse("ok", tuple(outputs), None)

    def shutdown(self) -> None:
        self._state = "closed"


# --- supervised subprocess sessions -------------------------------------------

@dataclass(frozen=True)
class ResourceLimits:
    address_space_bytes: int = 1 << 30
    max_processes: int = 256
    disable_network: bool = False


@dataclass(frozen=True)
class EnvironmentSpec:
    argv: tuple[str, ...]
    env: Mapping[str, str] | None = None
    limits: ResourceLimits = field(default_factory=ResourceLimits)


def _limit_applier(limits: ResourceLimits):
    def apply() -> None:
        import resource

        for which, value in (
            (resource.RLIMIT_AS, limits.address_space_bytes),
            (resource.RLIMIT_NPROC, limits.max_processes),
        ):
            try:
                resource.setrlimit(which, (value, value))
            except (ValueError, OSError):
                pass
        if limits.disable_network:
            try:
                import ctypes

                CLONE_NEWNET = 0x40000000
                ctypes.CDLL(None, use_errno=True).unshare(CLONE_NEWNET)
            except Exception:
                pass

    return apply


class SubprocessExecutor:
    """One isolated worker session speaking the line protocol."""

    def __init__(
        self,
        spec: EnvironmentSpec,
        *,
        handshake_timeout_s: float = 10.0,
        grace_s: float = SUPERVISION_GRACE_S,
    ):
        self._spec = spec
        self._grace_s = grace_s
        self._handshake_timeout_s = handshake_timeout_s
        self._lock = threading.Lock()
        self._closed = threading.Event()
        self._state = "starting"
        self._proc: subprocess.Popen | None = None
        self._lines: queue.Queue = queue.Queue()
        self._workdir: str | None = None
        self._spawn()
        self._state = "ready"

    @property
    def state(self) -> str:
        return self._state

    def _spawn(self) -> None:
        self._workdir = tempfile.mkdtemp(prefix="nbcampus-exec-")
        env = dict(os.environ)
        if self._spec.env:
            env.update(self._spec.env)
        try:
            self._proc = subprocess.Popen(
                list(self._spec.argv),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                cwd=self._workdir,
                env=env,
                preexec_fn=_limit_applier(self._spec.limits),
                start_new_session=True,
            )
        except OSError as exc:
            raise SpawnFailure(f"cannot start worker {self._spec.argv}: {exc}") from exc
        self._lines = queue.Queue()
        threading.Thread(target=self._reader, args=(self._proc, self._lines), daemon=True).start()
        line = self._next_line(self._handshake_timeout_s)
        if line is None or line is _EOF:
            self._kill()
            raise HandshakeTimeout(
                f"worker {self._spec.argv} did not present a valid handshake"
            )
        try:
            hello = json.loads(line)
        except json.JSONDecodeError:
            hello = None
        if hello != HANDSHAKE:
            self._kill()
            raise HandshakeTimeout(f"worker sent invalid handshake: {line!r}")

    @staticmethod
    def _reader(proc: subprocess.Popen, lines: queue.Queue) -> None:
        for raw in proc.stdout:
            lines.put(raw)
        lines.put(_EOF)

    def _next_line(self, timeout_s: float) -> object:
        """One protocol line: bytes, _EOF when the worker exited, None on timeout."""
        try:
            return self._lines.get(timeout=timeout_s)
        except queue.Empty:
            return None

    def execute(self, code: str, timeout_ms: int) -> ExecResponse:
        with self._lock:
            if self._closed.is_set():
                raise SessionClosed("executor session is closed")
            self._state = "busy"
            try:
                return self._execute_locked(code, timeout_ms)
            finally:
                if not self._closed.is_set():
                    self._state = "ready"

    def _execute_locked(self, code: str, timeout_ms: int) -> ExecResponse:
        request_id = uuid.uuid4().hex
        line = json.dumps({"id": request_id, "code": code, "timeout_ms": timeout_ms})
        try:
            self._proc.stdin.write(line.encode("utf-8") + b"\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError, ValueError) as exc:
            if self._closed.is_set():
                raise SessionClosed("executor session is closed") from exc
            raise ExecutorProtocolError(f"worker is gone: {exc}") from exc

        raw = self._next_line(timeout_ms / 1000.0 + self._grace_s)
        if self._closed.is_set():
            raise SessionClosed("executor session closed while a request was in flight")
        if raw is None:
            # No response in time: kill the worker and start a fresh one so
            # the session can keep serving later cells.
            self._kill()
            try:
                self._spawn()
            except (SpawnFailure, HandshakeTimeout):
                self._closed.set()
                self._state = "closed"
            return ExecResponse(
                "timeout", (),
                {"ename": "CellTimeout", "evalue": f"no response within {timeout_ms} ms",
                 "traceback": []},
            )
        if raw is _EOF:
            raise ExecutorProtocolError("worker exited before answering")
        try:
            obj = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ExecutorProtocolError(f"worker wrote a non-JSON line: {raw[:120]!r}") from exc
        if not isinstance(obj, dict) or obj.get("id") != request_id:
            raise ExecutorProtocolError(f"response id mismatch: {obj!r}")
        status = obj.get("status")
        if status not in ("ok", "error", "timeout"):
            raise ExecutorProtocolError(f"invalid response status: {status!r}")
        outputs_raw = obj.get("outputs", [])
        if not isinstance(outputs_raw, list):
            raise ExecutorProtocolError("response outputs must be a list")
        outputs = tuple(output_from_wire(o) for o in outputs_raw)
        error = obj.get("error")
        if error is not None and not isinstance(error, dict):
            raise ExecutorProtocolError("response error must be an object or null")
        return ExecResponse(status, outputs, error)

    def _kill(self) -> None:
        proc = self._proc
        if proc is None:
            return
        try:
            os.killpg(os.getpgid(proc.pid), signal.SIGKILL)
        except (ProcessLookupError, PermissionError, OSError):
            try:
                proc.kill()
            except OSError:
                pass
        try:
            proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            pass
        self._cleanup_workdir()

    def _cleanup_workdir(self) -> None:
        if self._workdir:
            shutil.rmtree(self._workdir, ignore_errors=True)
            self._workdir = None

    def shutdown(self) -> None:
        """Close the session: EOF first so the worker can exit cleanly, then kill."""
        if self._closed.is_set():
            return
        self._closed.set()
        self._state = "closed"
        proc = self._proc
        if proc is None:
            return
        try:
            proc.stdin.close()
        except OSError:
            pass
        try:
            proc.wait(timeout=2)
        except subprocess.TimeoutExpired:
            self._kill()
        else:
            self._cleanup_workdir()
        # Wake any reader-blocked execute call.
        self._lines.put(None)


# --- environment registry ------------------------------------------------------

def worker_argv() -> tuple[str, ...] | None:
    """Command line of the grading worker, if one is available."""
    override = os.environ.get(WORKER_ENV_VAR)
    if override:
        return tuple(shlex.split(override))
    if importlib.util.find_spec("nbcampus_worker") is not None:
        return (sys.executable, "-m", "nbcampus_worker")
    return None


def worker_available() -> bool:
    return worker_argv() is not None


def default_environments(limits: ResourceLimits | None = None) -> dict[str, EnvironmentSpec]:
    argv = worker_argv()
    if argv is None:
        return {}
    return {"default": EnvironmentSpec(argv, limits=limits or ResourceLimits())}


class ExecutorSupervisor:
    """Registry of named environments that can start worker sessions."""

    def __init__(self, environments: Mapping[str, EnvironmentSpec] | None = None, **session_kwargs):
        self.environments = dict(environments) if environments is not None else default_environments()
        self.session_kwargs = session_kwargs

    def start_session(self, environment: str = "default") -> SubprocessExecutor:
        spec = self.environments.get(environment)
        if spec is None:
            raise UnknownEnvironment(f"no executor environment named {environment!r}")
        return SubprocessExecutor(spec, **self.session_kwargs)
