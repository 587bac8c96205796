"""Execution worker: one stateful session per process over NDJSON pipes.

The worker announces itself with a handshake line, then answers one
response line per request line until stdin reaches EOF. Code runs in a
single namespace that lives for the whole process, so later cells see
names defined by earlier ones. Timeouts are enforced by the supervising
process (which kills us), not in here.
"""
from __future__ import annotations

import ast
import io
import json
import os
import sys
import traceback
from contextlib import redirect_stderr, redirect_stdout
from typing import Any, TextIO

HANDSHAKE = {"hello": "executor", "version": 1}


def _claim_fds() -> tuple[TextIO, TextIO]:
    """Reserve the protocol pipes before any user code can touch them.

    Raw descriptor writes (os.write(1, ...)) must never land in the
    protocol stream, so both original fds are duplicated onto private
    handles and fds 0/1 are repointed at /dev/null.
    """
    proto_in = os.fdopen(os.dup(0), "r", encoding="utf-8")
    proto_out = os.fdopen(os.dup(1), "w", encoding="utf-8")
    devnull = os.open(os.devnull, os.O_RDWR)
    os.dup2(devnull, 0)
    os.dup2(devnull, 1)
    os.close(devnull)
    sys.stdin = open(os.devnull, "r", encoding="utf-8")
    return proto_in, proto_out


def execute_cell(code: str, namespace: dict[str, Any]) -> dict[str, Any]:
    """Run one cell body and describe the outcome in wire shape.

    Mirrors notebook semantics: captured stdout/stderr become stream
    outputs, and when the last statement is an expression its repr comes
    back as an execute_result (None stays silent, like a notebook).
    """
    try:
        tree = ast.parse(code, "<cell>", "exec")
    except SyntaxError as exc:
        detail = traceback.format_exception_only(type(exc), exc)
        error = {"ename": "SyntaxError", "evalue": str(exc),
                 "traceback": [s.rstrip("\n") for s in detail]}
        return {"status": "error", "outputs": [{"type": "error", **error}],
                "error": error}

    tail = None
    if tree.body and isinstance(tree.body[-1], ast.Expr):
        tail = ast.Expression(tree.body.pop().value)

    out_buf, err_buf = io.StringIO(), io.StringIO()
    status, error, result_repr = "ok", None, None
    try:
        with redirect_stdout(out_buf), redirect_stderr(err_buf):
            if tree.body:
                exec(compile(tree, "<cell>", "exec"), namespace)
            if tail is not None:
                value = eval(compile(tail, "<cell>", "eval"), namespace)
                if value is not None:
                    namespace["_"] = value
                    result_repr = repr(value)
    except BaseException as exc:  # grading cells may raise anything, incl. SystemExit
        status = "error"
        frames = traceback.format_exception(type(exc), exc, exc.__traceback__)
        error = {"ename": type(exc).__name__, "evalue": str(exc),
                 "traceback": [line.rstrip("\n") for line in frames]}

    outputs: list[dict[str, Any]] = []
    if out_buf.getvalue():
        outputs.append({"type": "stream", "name": "stdout", "text": out_buf.getvalue()})
    if err_buf.getvalue():
        outputs.append({"type": "stream", "name": "stderr", "text": err_buf.getvalue()})
    if result_repr is not None:
        outputs.append({"type": "execute_result", "data": {"text/plain": result_repr}})
    if error is not None:
        outputs.append({"type": "error", **error})
    return {"status": status, "outputs": outputs, "error": error}


def _write(proto_out: TextIO, obj: dict[str, Any]) -> None:
    proto_out.write(json.dumps(obj) + "\n")
    proto_out.flush()


def serve_loop(proto_in: TextIO, proto_out: TextIO) -> None:
    namespace: dict[str, Any] = {"__name__": "__main__"}
    _write(proto_out, HANDSHAKE)
    for line in proto_in:
        line = line.strip()
        if not line:
            continue
        request_id = None
        try:
            request = json.loads(line)
            if not isinstance(request, dict):
                raise ValueError("request must be a JSON object")
            request_id = request.get("id")
            code = request.get("code")
            if not isinstance(code, str):
                raise ValueError("request lacks a string 'code' field")
        except ValueError as exc:
            error = {"ename": "ProtocolError", "evalue": str(exc), "traceback": []}
            _write(proto_out, {"id": request_id, "status": "error",
                               "outputs": [{"type": "error", **error}],
                               "error": error})
            continue
        reply = execute_cell(code, namespace)
        _write(proto_out, {"id": request_id, **reply})


def main() -> int:
    proto_in, proto_out = _claim_fds()
    serve_loop(proto_in, proto_out)
    return 0
