"""Protocol-level tests: drive the worker as a real subprocess."""
from __future__ import annotations

import json
import os
import subprocess
import sys

import pytest


@pytest.fixture()
def worker():
    proc = subprocess.Popen(
        [sys.executable, "-m", "nbcampus_worker"],
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        stderr=subprocess.DEVNULL,
        text=True,
        bufsize=1,
    )
    assert json.loads(proc.stdout.readline()) == {"hello": "executor", "version": 1}
    yield proc
    if proc.poll() is None:
        proc.stdin.close()
        assert proc.wait(timeout=10) == 0, "EOF on stdin must end the process cleanly"


def send(proc, code: str, request_id: str = "r1") -> None:
    proc.stdin.write(json.dumps({"id": request_id, "code": code,
                                 "timeout_ms": 1000}) + "\n")
    proc.stdin.flush()


def ask(proc, code: str, request_id: str = "r1") -> dict:
    send(proc, code, request_id)
    reply = json.loads(proc.stdout.readline())
    assert reply["id"] == request_id
    return reply


def test_print_yields_stdout_stream(worker):
    reply = ask(worker, "print(2+2)")
    assert reply["status"] == "ok"
    assert reply["outputs"] == [{"type": "stream", "name": "stdout", "text": "4\n"}]
    assert reply["error"] is None


def test_namespace_persists_across_requests(worker):
    assert ask(worker, "a = 5", "r1")["status"] == "ok"
    reply = ask(worker, "a * 2", "r2")
    assert reply["status"] == "ok"
    assert {"type": "execute_result", "data": {"text/plain": "10"}} in reply["outputs"]


def test_division_by_zero_reported(worker):
    reply = ask(worker, "1/0")
    assert reply["status"] == "error"
    assert reply["error"]["ename"] == "ZeroDivisionError"
    assert reply["error"]["evalue"] == "division by zero"
    errors = [o for o in reply["outputs"] if o["type"] == "error"]
    assert errors and errors[0]["ename"] == "ZeroDivisionError"
    assert any("ZeroDivisionError" in line for line in errors[0]["traceback"])


def test_syntax_error_reported(worker):
    reply = ask(worker, "def broken(:")
    assert reply["status"] == "error"
    assert reply["error"]["ename"] == "SyntaxError"


def test_stderr_captured_separately(worker):
    reply = ask(worker, "import sys\nsys.stderr.write('warn\\n')\nprint('ok')")
    by_name = {o.get("name"): o["text"] for o in reply["outputs"]
               if o["type"] == "stream"}
    assert by_name == {"stdout": "ok\n", "stderr": "warn\n"}


def test_output_before_exception_is_kept(worker):
    reply = ask(worker, "print('before')\nraise RuntimeError('after')")
    assert reply["status"] == "error"
    kinds = [o["type"] for o in reply["outputs"]]
    assert kinds == ["stream", "error"]
    assert reply["outputs"][0]["text"] == "before\n"


def test_trailing_none_expression_stays_silent(worker):
    reply = ask(worker, "None")
    assert reply["status"] == "ok"
    assert reply["outputs"] == []


def test_underscore_holds_last_result(worker):
    ask(worker, "1 + 1", "r1")
    reply = ask(worker, "_ * 2", "r2")
    assert {"type": "execute_result", "data": {"text/plain": "4"}} in reply["outputs"]


def test_unicode_round_trip(worker):
    reply = ask(worker, "print('héllo')")
    assert reply["outputs"][0]["text"] == "héllo\n"


def test_malformed_line_answered_and_loop_survives(worker):
    worker.stdin.write("this is not json\n")
    worker.stdin.flush()
    reply = json.loads(worker.stdout.readline())
    assert reply["status"] == "error"
    assert reply["error"]["ename"] == "ProtocolError"
    assert reply["id"] is None
    assert ask(worker, "print('still here')")["status"] == "ok"


def test_missing_code_field_keeps_request_id(worker):
    worker.stdin.write(json.dumps({"id": "r9", "timeout_ms": 1000}) + "\n")
    worker.stdin.flush()
    reply = json.loads(worker.stdout.readline())
    assert reply["id"] == "r9"
    assert reply["error"]["ename"] == "ProtocolError"


def test_blank_lines_ignored(worker):
    worker.stdin.write("\n\n")
    worker.stdin.flush()
    assert ask(worker, "2 + 2")["status"] == "ok"


def test_raw_fd_writes_cannot_corrupt_protocol(worker):
    send(worker, "import os\nos.write(1, b'spray\\n')\nprint('clean')")
    raw = worker.stdout.readline()
    assert "spray" not in raw
    reply = json.loads(raw)
    assert reply["status"] == "ok"
    streams = [o for o in reply["outputs"] if o["type"] == "stream"]
    assert streams == [{"type": "stream", "name": "stdout", "text": "clean\n"}]


def test_sys_exit_reported_not_fatal(worker):
    reply = ask(worker, "import sys\nsys.exit(3)")
    assert reply["status"] == "error"
    assert reply["error"]["ename"] == "SystemExit"
    assert ask(worker, "print('alive')", "r2")["status"] == "ok"


def test_input_sees_eof(worker):
    reply = ask(worker, "input()")
    assert reply["status"] == "error"
    assert reply["error"]["ename"] == "EOFError"


def test_responses_come_back_in_request_order(worker):
    send(worker, "first = 1", "r1")
    send(worker, "first + 1", "r2")
    first = json.loads(worker.stdout.readline())
    second = json.loads(worker.stdout.readline())
    assert (first["id"], second["id"]) == ("r1", "r2")
    assert {"type": "execute_result", "data": {"text/plain": "2"}} in second["outputs"]


def test_only_protocol_lines_on_stdout(worker):
    # Every line the worker emits must parse as a JSON response object.
    for i in range(5):
        send(worker, f"print({i})", f"r{i}")
    for i in range(5):
        line = worker.stdout.readline()
        reply = json.loads(line)
        assert reply["id"] == f"r{i}"
        assert reply["outputs"][0]["text"] == f"{i}\n"


def test_eof_exits_zero():
    proc = subprocess.Popen(
        [sys.executable, "-m", "nbcampus_worker"],
        stdin=subprocess.PIPE, stdout=subprocess.PIPE,
        stderr=subprocess.DEVNULL, text=True,
    )
    assert json.loads(proc.stdout.readline())["hello"] == "executor"
    proc.stdin.close()
    assert proc.wait(timeout=10) == 0


def test_function_definitions_share_the_namespace(worker):
    ask(worker, "def double(x):\n    return x * 2", "r1")
    reply = ask(worker, "double(21)", "r2")
    assert {"type": "execute_result", "data": {"text/plain": "42"}} in reply["outputs"]
