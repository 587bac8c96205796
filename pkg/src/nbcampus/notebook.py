"""Notebook document model: parse, serialize, inspect, and slice.

The on-disk format is Jupyter's JSON document format, major version 4.
Parsing normalizes every multi-line text field (cell sources, stream text,
mime payloads) from the list-of-lines form to a single string by verbatim
concatenation, so the in-memory model always carries plain strings.
Unknown keys at the cell and output level are preserved in ``extra`` so a
parse/serialize round trip keeps them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping

from .errors import (
    MalformedJson,
    SchemaViolation,
    StartMarkNotFound,
    UnsupportedFormat,
)

FORMAT_MAJOR = 4
DEFAULT_FORMAT_MINOR = 4


class CellKind(str, Enum):
    MARKDOWN = "markdown"
    CODE = "code"
    RAW = "raw"


class OutputKind(str, Enum):
    STREAM = "stream"
    DISPLAY_DATA = "display_data"
    EXECUTE_RESULT = "execute_result"
    ERROR = "error"


@dataclass(frozen=True)
class Output:
    """One entry of a code cell's outputs list.

    Exactly the fields for ``kind`` are meaningful: streams carry
    name/text, display_data and execute_result carry data/metadata (and
    execute_result an execution_count), errors carry ename/evalue/traceback.
    """

    kind: OutputKind
    name: str | None = None
    text: str | None = None
    data: dict[str, Any] = field(default_factory=dict)
    metadata: dict[str, Any] = field(default_factory=dict)
    ename: str | None = None
    evalue: str | None = None
    traceback: tuple[str, ...] = ()
    execution_count: int | None = None
    extra: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class GradingMeta:
    """Parsed view of a cell's nbgrader metadata block."""

    grade: bool = False
    solution: bool = False
    locked: bool = False
    grade_id: str | None = None
    points: float | None = None

    @property
    def is_test(self) -> bool:
        return self.grade and not self.solution

    @property
    def protected(self) -> bool:
        return self.is_test or (self.locked and not self.solution)


@dataclass(frozen=True)
class Cell:
    kind: CellKind
    source: str
    metadata: dict[str, Any] = field(default_factory=dict)
    outputs: tuple[Output, ...] = ()
    execution_count: int | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind is not CellKind.CODE and (self.outputs or self.execution_count is not None):
            raise SchemaViolation(f"{self.kind.value} cell cannot carry outputs or execution_count")

    @property
    def grading(self) -> GradingMeta | None:
        """Grading metadata if the cell has an nbgrader block, else None."""
        block = self.metadata.get("nbgrader")
        if not isinstance(block, Mapping):
            return None
        points = block.get("points")
        if isinstance(points, bool) or not isinstance(points, (int, float)):
            points = None
        grade_id = block.get("grade_id")
        if not isinstance(grade_id, str) or not grade_id:
            grade_id = None
        return GradingMeta(
            grade=bool(block.get("grade", False)),
            solution=bool(block.get("solution", False)),
            locked=bool(block.get("locked", False)),
            grade_id=grade_id,
            points=float(points) if points is not None else None,
        )


@dataclass(frozen=True)
class Notebook:
    cells: tuple[Cell, ...] = ()
    metadata: dict[str, Any] = field(default_factory=dict)
    format_major: int = FORMAT_MAJOR
    format_minor: int = DEFAULT_FORMAT_MINOR

    def __post_init__(self) -> None:
        if self.format_major != FORMAT_MAJOR:
            raise UnsupportedFormat(f"notebook format {self.format_major} not supported (need 4)")


@dataclass(frozen=True)
class SliceSpec:
    """Half-open cell range selected by substring marks.

    An omitted start mark means "from the first cell"; an omitted end mark
    means "through the last cell". Marks are matched case-sensitively
    against the full cell source, any cell kind.
    """

    start_mark: str | None = None
    end_mark: str | None = None

    def __post_init__(self) -> None:
        if self.start_mark == "":
            raise ValueError("start_mark must not be empty")
        if self.end_mark == "":
            raise ValueError("end_mark must not be empty")


# --- construction helpers ---------------------------------------------------

def markdown_cell(source: str, metadata: dict[str, Any] | None = None) -> Cell:
    return Cell(CellKind.MARKDOWN, source, metadata or {})


def code_cell(
    source: str,
    outputs: Iterable[Output] = (),
    execution_count: int | None = None,
    metadata: dict[str, Any] | None = None,
) -> Cell:
    return Cell(CellKind.CODE, source, metadata or {}, tuple(outputs), execution_count)


def raw_cell(source: str, metadata: dict[str, Any] | None = None) -> Cell:
    return Cell(CellKind.RAW, source, metadata or {})


def stream_output(name: str, text: str) -> Output:
    return Output(OutputKind.STREAM, name=name, text=text)


def display_output(data: dict[str, Any], metadata: dict[str, Any] | None = None) -> Output:
    return Output(OutputKind.DISPLAY_DATA, data=data, metadata=metadata or {})


def result_output(
    data: dict[str, Any],
    execution_count: int | None = None,
    metadata: dict[str, Any] | None = None,
) -> Output:
    return Output(
        OutputKind.EXECUTE_RESULT,
        data=data,
        metadata=metadata or {},
        execution_count=execution_count,
    )


def error_output(ename: str, evalue: str, traceback: Iterable[str] = ()) -> Output:
    return Output(OutputKind.ERROR, ename=ename, evalue=evalue, traceback=tuple(traceback))


def new_notebook(
    cells: Iterable[Cell] = (),
    metadata: dict[str, Any] | None = None,
    format_minor: int = DEFAULT_FORMAT_MINOR,
) -> Notebook:
    return Notebook(tuple(cells), metadata or {}, FORMAT_MAJOR, format_minor)


# --- parsing ----------------------------------------------------------------

def _normalize_text(value: Any, where: str) -> str:
    """Multi-line text fields may be a string or a list of line strings;
    the list form is joined verbatim (lines carry their own newlines)."""
    if isinstance(value, str):
        return value
    if isinstance(value, list) and all(isinstance(part, str) for part in value):
        return "".join(value)
    raise SchemaViolation(f"{where}: expected string or list of strings")


def _normalize_mime_bundle(value: Any, where: str) -> dict[str, Any]:
    if not isinstance(value, dict):
        raise SchemaViolation(f"{where}: expected mime-type mapping")
    bundle: dict[str, Any] = {}
    for mime, payload in value.items():
        if isinstance(payload, list) and all(isinstance(p, str) for p in payload):
            bundle[mime] = "".join(payload)
        else:
            bundle[mime] = payload
    return bundle


def _require(obj: Mapping[str, Any], key: str, where: str) -> Any:
    if key not in obj:
        raise SchemaViolation(f"{where}: missing required field {key!r}")
    return obj[key]


def _parse_output(obj: Any, where: str) -> Output:
    if not isinstance(obj, Mapping):
        raise SchemaViolation(f"{where}: output must be an object")
    output_type = _require(obj, "output_type", where)
    try:
        kind = OutputKind(output_type)
    except ValueError:
        raise SchemaViolation(f"{where}: unknown output_type {output_type!r}") from None

    known = {"output_type"}
    name = text = ename = evalue = None
    data: dict[str, Any] = {}
    metadata: dict[str, Any] = {}
    traceback: tuple[str, ...] = ()
    execution_count = None
    if kind is OutputKind.STREAM:
        name = _require(obj, "name", where)
        text = _normalize_text(_require(obj, "text", where), where)
        known |= {"name", "text"}
    elif kind is OutputKind.ERROR:
        ename = str(_require(obj, "ename", where))
        evalue = str(_require(obj, "evalue", where))
        tb = obj.get("traceback", [])
        if not (isinstance(tb, list) and all(isinstance(t, str) for t in tb)):
            raise SchemaViolation(f"{where}: traceback must be a list of strings")
        traceback = tuple(tb)
        known |= {"ename", "evalue", "traceback"}
    else:
        data = _normalize_mime_bundle(obj.get("data", {}), where)
        metadata = dict(obj.get("metadata", {}))
        known |= {"data", "metadata"}
        if kind is OutputKind.EXECUTE_RESULT:
            execution_count = obj.get("execution_count")
            if execution_count is not None and not isinstance(execution_count, int):
                raise SchemaViolation(f"{where}: execution_count must be an integer or null")
            known.add("execution_count")
    extra = {k: v for k, v in obj.items() if k not in known}
    return Output(
        kind,
        name=name,
        text=text,
        data=data,
        metadata=metadata,
        ename=ename,
        evalue=evalue,
        traceback=traceback,
        execution_count=execution_count,
        extra=extra,
    )


def _parse_cell(obj: Any, index: int) -> Cell:
    where = f"cells[{index}]"
    if not isinstance(obj, Mapping):
        raise SchemaViolation(f"{where}: cell must be an object")
    cell_type = _require(obj, "cell_type", where)
    try:
        kind = CellKind(cell_type)
    except ValueError:
        raise SchemaViolation(f"{where}: unknown cell_type {cell_type!r}") from None
    source = _normalize_text(_require(obj, "source", where), where)
    metadata = obj.get("metadata", {})
    if not isinstance(metadata, Mapping):
        raise SchemaViolation(f"{where}: metadata must be an object")

    outputs: tuple[Output, ...] = ()
    execution_count = None
    known = {"cell_type", "source", "metadata"}
    if kind is CellKind.CODE:
        raw_outputs = obj.get("outputs", [])
        if not isinstance(raw_outputs, list):
            raise SchemaViolation(f"{where}: outputs must be a list")
        outputs = tuple(
            _parse_output(o, f"{where}.outputs[{i}]") for i, o in enumerate(raw_outputs)
        )
        execution_count = obj.get("execution_count")
        if execution_count is not None and not isinstance(execution_count, int):
            raise SchemaViolation(f"{where}: execution_count must be an integer or null")
        known |= {"outputs", "execution_count"}
    elif "outputs" in obj or "execution_count" in obj:
        raise SchemaViolation(f"{where}: {kind.value} cell cannot carry outputs or execution_count")
    extra = {k: v for k, v in obj.items() if k not in known}
    return Cell(kind, source, dict(metadata), outputs, execution_count, extra)


def parse_notebook(raw: bytes | str) -> Notebook:
    """Parse notebook JSON bytes (or text) into the document model."""
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedJson(f"not valid UTF-8: {exc}") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedJson(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaViolation("top-level value must be an object")
    major = _require(doc, "nbformat", "notebook")
    if not isinstance(major, int):
        raise SchemaViolation("nbformat must be an integer")
    if major != FORMAT_MAJOR:
        raise UnsupportedFormat(f"notebook format {major} not supported (need 4)")
    minor = doc.get("nbformat_minor", 0)
    if not isinstance(minor, int):
        raise SchemaViolation("nbformat_minor must be an integer")
    cells_raw = _require(doc, "cells", "notebook")
    if not isinstance(cells_raw, list):
        raise SchemaViolation("cells must be a list")
    metadata = doc.get("metadata", {})
    if not isinstance(metadata, Mapping):
        raise SchemaViolation("notebook metadata must be an object")
    cells = tuple(_parse_cell(c, i) for i, c in enumerate(cells_raw))
    return Notebook(cells, dict(metadata), major, minor)


# --- serialization ----------------------------------------------------------

def _output_to_json(output: Output) -> dict[str, Any]:
    obj: dict[str, Any] = {"output_type": output.kind.value}
    if output.kind is OutputKind.STREAM:
        obj["name"] = output.name
        obj["text"] = output.text
    elif output.kind is OutputKind.ERROR:
        obj["ename"] = output.ename
        obj["evalue"] = output.evalue
        obj["traceback"] = list(output.traceback)
    else:
        obj["data"] = output.data
        obj["metadata"] = output.metadata
        if output.kind is OutputKind.EXECUTE_RESULT:
            obj["execution_count"] = output.execution_count
    obj.update(output.extra)
    return obj


def _cell_to_json(cell: Cell) -> dict[str, Any]:
    obj: dict[str, Any] = {
        "cell_type": cell.kind.value,
        "metadata": cell.metadata,
        "source": cell.source,
    }
    if cell.kind is CellKind.CODE:
        obj["execution_count"] = cell.execution_count
        obj["outputs"] = [_output_to_json(o) for o in cell.outputs]
    obj.update(cell.extra)
    return obj


def serialize_notebook(nb: Notebook) -> bytes:
    """Serialize back to notebook JSON (UTF-8, stable key order)."""
    doc = {
        "cells": [_cell_to_json(c) for c in nb.cells],
        "metadata": nb.metadata,
        "nbformat": nb.format_major,
        "nbformat_minor": nb.format_minor,
    }
    return (json.dumps(doc, indent=1, sort_keys=True, ensure_ascii=False) + "\n").encode("utf-8")


def load_notebook(path: str) -> Notebook:
    with open(path, "rb") as fh:
        return parse_notebook(fh.read())


def save_notebook(nb: Notebook, path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_notebook(nb))


# --- inspection and slicing ---------------------------------------------------

def cell_text(cell: Cell) -> str:
    """The cell's source as a single string (normalized at parse time)."""
    return cell.source


def slice_notebook(nb: Notebook, spec: SliceSpec) -> Notebook:
    """Select the half-open cell range [s, e) described by ``spec``.

    s is the index of the first cell containing start_mark (0 when no start
    mark is given); a start mark that matches nothing raises
    StartMarkNotFound. e is the index of the first cell at position >= s
    containing end_mark, or the cell count when the end mark is omitted or
    never found after s. An end-mark hit before s is ignored; a missing end
    mark is not an error.
    """
    start = 0
    if spec.start_mark is not None:
        for i, cell in enumerate(nb.cells):
            if spec.start_mark in cell.source:
                start = i
                break
        else:
            raise StartMarkNotFound(f"start mark {spec.start_mark!r} not found in any cell")
    end = len(nb.cells)
    if spec.end_mark is not None:
        for i in range(start, len(nb.cells)):
            if spec.end_mark in nb.cells[i].source:
                end = i
                break
    return Notebook(nb.cells[start:end], dict(nb.metadata), nb.format_major, nb.format_minor)
