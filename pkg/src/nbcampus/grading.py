"""Assignment extraction, student release, submission sanitization, grading.

An instructor notebook declares its grading structure in nbgrader-style
cell metadata. Test cells (grade, not solution) carry points and earn them
iff their execution status is ok; locked cells are protected narrative or
setup. Releasing replaces ``### BEGIN SOLUTION`` .. ``### END SOLUTION``
regions (inclusive) with a stub. Sanitizing a submission restores every
protected cell's canonical source from the reference before anything runs,
so edits to tests or locked cells can change the score report only through
the ``tampered`` flag, never through the scored outcome.
"""

from __future__ import annotations

import copy
import json
import time
from dataclasses import dataclass, field, replace
from typing import Any

from .errors import (
    DuplicateGradeId,
    ExecutorFailure,
    MissingPoints,
    NbCampusError,
    NoGradedCells,
    SchemaViolation,
    UnbalancedSolutionDelimiters,
)
from .executor import DEFAULT_CELL_TIMEOUT_S, DEFAULT_TOTAL_TIMEOUT_S
from .notebook import (
    Cell,
    CellKind,
    Notebook,
    parse_notebook,
    serialize_notebook,
)

SOLUTION_BEGIN = "### BEGIN SOLUTION"
SOLUTION_END = "### END SOLUTION"
DEFAULT_STUB = "# YOUR CODE HERE\nraise NotImplementedError()"


@dataclass(frozen=True)
class ProtectedCell:
    """A reference cell whose source must survive into graded submissions.

    ``key`` is "id:<grade_id>" when the cell has a grade_id, else
    "locked:<k>" with k the ordinal among grade_id-less locked cells.
    """

    key: str
    grade_id: str | None
    is_test: bool
    points: float
    ref_index: int
    source: str


@dataclass(frozen=True)
class AssignmentSpec:
    assignment_id: str
    reference: Notebook
    protected: tuple[ProtectedCell, ...]
    points_possible: float
    environment: str = "default"

    @property
    def test_cells(self) -> tuple[ProtectedCell, ...]:
        return tuple(p for p in self.protected if p.is_test)

    @property
    def locked_cells(self) -> tuple[ProtectedCell, ...]:
        return tuple(p for p in self.protected if not p.is_test)

    def to_json(self) -> dict[str, Any]:
        return {
            "assignment_id": self.assignment_id,
            "environment": self.environment,
            "points_possible": self.points_possible,
            "protected": [
                {"key": p.key, "grade_id": p.grade_id, "is_test": p.is_test,
                 "points": p.points, "ref_index": p.ref_index, "source": p.source}
                for p in self.protected
            ],
            "reference": json.loads(serialize_notebook(self.reference).decode("utf-8")),
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "AssignmentSpec":
        return cls(
            assignment_id=obj["assignment_id"],
            reference=parse_notebook(json.dumps(obj["reference"])),
            protected=tuple(ProtectedCell(**p) for p in obj["protected"]),
            points_possible=obj["points_possible"],
            environment=obj.get("environment", "default"),
        )


@dataclass(frozen=True)
class ExecutionLimits:
    cell_timeout_s: float = DEFAULT_CELL_TIMEOUT_S
    total_timeout_s: float = DEFAULT_TOTAL_TIMEOUT_S


@dataclass(frozen=True)
class GradeRow:
    grade_id: str
    points: float
    earned: float
    passed: bool
    message: str | None = None


@dataclass(frozen=True)
class GradeReport:
    assignment_id: str
    rows: tuple[GradeRow, ...]
    earned: float
    possible: float
    tampered: bool = False
    duration_ms: int = 0

    def to_json(self) -> dict[str, Any]:
        return {
            "assignment_id": self.assignment_id,
            "earned": self.earned,
            "possible": self.possible,
            "tampered": self.tampered,
            "duration_ms": self.duration_ms,
            "rows": [
                {"grade_id": r.grade_id, "points": r.points, "earned": r.earned,
                 "passed": r.passed, "message": r.message}
                for r in self.rows
            ],
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "GradeReport":
        return cls(
            assignment_id=obj["assignment_id"],
            rows=tuple(GradeRow(**r) for r in obj["rows"]),
            earned=obj["earned"],
            possible=obj["possible"],
            tampered=obj.get("tampered", False),
            duration_ms=obj.get("duration_ms", 0),
        )


# --- extraction ---------------------------------------------------------------

def extract_assignment(
    nb: Notebook, assignment_id: str, environment: str = "default"
) -> AssignmentSpec:
    protected: list[ProtectedCell] = []
    seen_ids: set[str] = set()
    locked_ordinal = 0
    for index, cell in enumerate(nb.cells):
        meta = cell.grading
        if meta is None:
            continue
        if meta.grade_id is not None:
            if meta.grade_id in seen_ids:
                raise DuplicateGradeId(f"grade_id {meta.grade_id!r} appears more than once")
            seen_ids.add(meta.grade_id)
        if meta.is_test and cell.kind is CellKind.CODE:
            if meta.grade_id is None:
                raise SchemaViolation(f"test cell at index {index} has no grade_id")
            if meta.points is None or meta.points < 0:
                raise MissingPoints(f"test cell {meta.grade_id!r} has no usable points value")
            protected.append(ProtectedCell(
                f"id:{meta.grade_id}", meta.grade_id, True, meta.points, index, cell.source,
            ))
        elif meta.locked and not meta.solution and not meta.is_test:
            if meta.grade_id is not None:
                key = f"id:{meta.grade_id}"
            else:
                key = f"locked:{locked_ordinal}"
                locked_ordinal += 1
            protected.append(ProtectedCell(key, meta.grade_id, False, 0.0, index, cell.source))
    tests = [p for p in protected if p.is_test]
    if not tests:
        raise NoGradedCells(f"{assignment_id}: notebook contains no autograded test cells")
    points_possible = sum(p.points for p in tests)
    if points_possible <= 0:
        raise MissingPoints(f"{assignment_id}: total points must be greater than zero")
    return AssignmentSpec(assignment_id, nb, tuple(protected), points_possible, environment)


# --- release -------------------------------------------------------------------

def _replace_solution_regions(source: str, stub: str) -> tuple[str, bool]:
    out: list[str] = []
    inside = False
    changed = False
    for line in source.split("\n"):
        stripped = line.strip()
        if stripped == SOLUTION_BEGIN:
            if inside:
                raise UnbalancedSolutionDelimiters("nested BEGIN SOLUTION")
            inside = True
            changed = True
            indent = line[: len(line) - len(line.lstrip())]
            out.extend(indent + part if part else part for part in stub.split("\n"))
        elif stripped == SOLUTION_END:
            if not inside:
                raise UnbalancedSolutionDelimiters("END SOLUTION without a matching BEGIN")
            inside = False
        elif not inside:
            out.append(line)
    if inside:
        raise UnbalancedSolutionDelimiters("BEGIN SOLUTION never closed")
    return "\n".join(out), changed


def release_student_copy(spec: AssignmentSpec, stub: str = DEFAULT_STUB) -> Notebook:
    """Student-facing copy: solution regions stubbed, everything else intact."""
    cells: list[Cell] = []
    for cell in spec.reference.cells:
        meta = cell.grading
        if meta is not None and meta.solution and cell.kind is CellKind.CODE:
            new_source, changed = _replace_solution_regions(cell.source, stub)
            if changed:
                # Outputs of removed solution code would leak answers.
                cells.append(replace(cell, source=new_source, outputs=(), execution_count=None))
                continue
        cells.append(cell)
    return Notebook(tuple(cells), copy.deepcopy(spec.reference.metadata),
                    spec.reference.format_major, spec.reference.format_minor)


# --- sanitization ----------------------------------------------------------------

def _restored_cell(ref_cell: Cell, canonical_source: str, student: Cell | None) -> Cell:
    extra = dict(student.extra) if student is not None and student.kind == ref_cell.kind else {}
    return Cell(
        ref_cell.kind,
        canonical_source,
        copy.deepcopy(ref_cell.metadata),
        (),
        None,
        extra,
    )


def sanitize_submission(sub: Notebook, spec: AssignmentSpec) -> tuple[Notebook, bool]:
    """Restore protected cells from the reference; report whether anything changed.

    Total: any parseable notebook sanitizes. Matched protected cells with
    intact source/kind/grading metadata pass through untouched; everything
    else is rebuilt from the reference, and missing protected cells are
    re-inserted at their original position relative to their surviving
    neighbors. ``tampered`` is True iff some repair was needed.
    """
    cells = list(sub.cells)
    tampered = False
    spec_ids = {p.grade_id for p in spec.protected if p.grade_id is not None}

    by_grade_id: dict[str, int] = {}
    gidless_locked: list[int] = []
    duplicate_positions: list[int] = []
    for index, cell in enumerate(cells):
        meta = cell.grading
        if meta is None or meta.solution:
            continue
        if meta.grade_id is not None and meta.grade_id in spec_ids:
            if meta.grade_id in by_grade_id:
                duplicate_positions.append(index)
            else:
                by_grade_id[meta.grade_id] = index
        elif meta.locked and meta.grade_id is None:
            gidless_locked.append(index)

    # A stray copy of a protected cell must not look protected afterwards.
    for index in duplicate_positions:
        meta = dict(cells[index].metadata)
        meta.pop("nbgrader", None)
        cells[index] = replace(cells[index], metadata=meta)
        tampered = True

    positions: dict[str, int] = {}
    gidless_seen = 0
    for p in spec.protected:
        if p.grade_id is not None:
            index = by_grade_id.get(p.grade_id)
        else:
            index = gidless_locked[gidless_seen] if gidless_seen < len(gidless_locked) else None
            gidless_seen += 1
        if index is None:
            continue
        positions[p.key] = index
        student = cells[index]
        ref_cell = spec.reference.cells[p.ref_index]
        intact = (
            student.kind == ref_cell.kind
            and student.source == p.source
            and student.metadata.get("nbgrader") == ref_cell.metadata.get("nbgrader")
        )
        if not intact:
            cells[index] = _restored_cell(ref_cell, p.source, student)
            tampered = True

    # Re-insert protected cells the submission lost. Placement biases late:
    # just before the next surviving protected cell, or at the very end when
    # none follows. Tests sit after the answer cells they exercise, so a
    # re-inserted test must never jump ahead of surviving student work.
    for j, p in enumerate(spec.protected):
        if p.key in positions:
            continue
        tampered = True
        prev = [positions[q.key] for q in spec.protected[:j] if q.key in positions]
        following = [positions[q.key] for q in spec.protected[j + 1:] if q.key in positions]
        lower = max(prev) + 1 if prev else 0
        if following:
            insert_at = max(min(following), lower)
        elif prev:
            insert_at = len(cells)
        else:
            insert_at = min(p.ref_index, len(cells))
        cells.insert(insert_at, _restored_cell(spec.reference.cells[p.ref_index], p.source, None))
        for key, value in positions.items():
            if value >= insert_at:
                positions[key] = value + 1
        positions[p.key] = insert_at

    sanitized = Notebook(tuple(cells), copy.deepcopy(sub.metadata),
                         sub.format_major, sub.format_minor)
    return sanitized, tampered


# --- grading ---------------------------------------------------------------------

def _failure_message(status: str, error: dict[str, Any] | None) -> str:
    if status == "timeout":
        return "timeout"
    if error:
        ename = error.get("ename", "Error")
        evalue = error.get("evalue", "")
        return f"{ename}: {evalue}" if evalue else str(ename)
    return "error"


def grade_submission(
    sanitized: Notebook,
    spec: AssignmentSpec,
    executor,
    limits: ExecutionLimits = ExecutionLimits(),
    *,
    tampered: bool = False,
) -> GradeReport:
    """Run code cells top to bottom in one session and score the test cells.

    A test cell earns its full points iff its status is ok; errors and
    timeouts in non-test cells do not abort the run. When the total budget
    runs out, cells not yet executed are skipped and their test rows read
    "not run". Executor-session failures surface as ExecutorFailure.
    """
    started = time.monotonic()
    deadline = started + limits.total_timeout_s
    results: dict[str, tuple[bool, str | None]] = {}
    test_ids = {p.grade_id for p in spec.test_cells}

    for cell in sanitized.cells:
        if cell.kind is not CellKind.CODE:
            continue
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            break
        timeout_ms = max(1, int(min(limits.cell_timeout_s, remaining) * 1000))
        try:
            response = executor.execute(cell.source, timeout_ms)
        except NbCampusError as exc:
            raise ExecutorFailure(f"executor failed while grading: {exc}") from exc
        meta = cell.grading
        if meta is not None and meta.is_test and meta.grade_id in test_ids:
            if response.status == "ok":
                results[meta.grade_id] = (True, None)
            else:
                results[meta.grade_id] = (False, _failure_message(response.status, response.error))

    rows = []
    for p in spec.test_cells:
        passed, message = results.get(p.grade_id, (False, "not run"))
        rows.append(GradeRow(
            grade_id=p.grade_id,
            points=p.points,
            earned=p.points if passed else 0.0,
            passed=passed,
            message=message,
        ))
    earned = sum(r.earned for r in rows)
    duration_ms = int((time.monotonic() - started) * 1000)
    return GradeReport(spec.assignment_id, tuple(rows), earned, spec.points_possible,
                       tampered, duration_ms)


def sanitize_and_grade(
    submission: Notebook,
    spec: AssignmentSpec,
    executor,
    limits: ExecutionLimits = ExecutionLimits(),
) -> GradeReport:
    sanitized, tampered = sanitize_submission(submission, spec)
    return grade_submission(sanitized, spec, executor, limits, tampered=tampered)
