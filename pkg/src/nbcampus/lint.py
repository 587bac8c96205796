"""Lesson-shape lint: five fixed checks over a notebook's cell list.

Rules flag pacing and narrative problems in teaching notebooks: long
uninterrupted code runs, thin prose, no outbound documentation links, no
easy exercises, no challenge prompts. Thresholds and token spellings are
configurable; the checks are pure functions of the cell list.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .notebook import Cell, CellKind, Notebook

# Markdown inline/reference links or bare URLs both count as "linking out".
_LINK_RE = re.compile(r"\]\(|https?://")


@dataclass(frozen=True)
class LintThresholds:
    max_consecutive_code: int = 4
    min_markdown_ratio: float = 0.30
    exercise_token: str = "Exercise"
    challenge_token: str = "Challenge"


@dataclass(frozen=True)
class LintFinding:
    rule_id: str
    severity: str  # warn | info
    message: str
    cell_index: int | None = None


def _code_runs(cells: tuple[Cell, ...]):
    start = None
    length = 0
    for index, cell in enumerate(cells):
        if cell.kind is CellKind.CODE:
            if start is None:
                start = index
            length += 1
        else:
            if start is not None:
                yield start, length
            start, length = None, 0
    if start is not None:
        yield start, length


def lint_notebook(nb: Notebook, thresholds: LintThresholds = LintThresholds()) -> list[LintFinding]:
    cells = nb.cells
    if not cells:
        return []
    findings: list[LintFinding] = []

    for start, length in _code_runs(cells):
        if length > thresholds.max_consecutive_code:
            findings.append(LintFinding(
                "D1_small_steps", "warn",
                f"{length} consecutive code cells with no prose in between "
                f"(limit {thresholds.max_consecutive_code}); break the work "
                "into smaller steps",
                cell_index=start,
            ))

    markdown = [c for c in cells if c.kind is CellKind.MARKDOWN]
    ratio = len(markdown) / len(cells)
    if ratio < thresholds.min_markdown_ratio:
        findings.append(LintFinding(
            "D3_narrative", "warn",
            f"only {ratio:.0%} of cells are markdown "
            f"(minimum {thresholds.min_markdown_ratio:.0%}); add narrative "
            "connecting the code",
        ))

    if not any(_LINK_RE.search(c.source) for c in markdown):
        findings.append(LintFinding(
            "D4_doc_links", "info",
            "no hyperlinks found in markdown; link out to documentation",
        ))

    if not any(thresholds.exercise_token in c.source for c in markdown):
        findings.append(LintFinding(
            "D5_easy_exercises", "info",
            f"no markdown cell mentions {thresholds.exercise_token!r}; "
            "interleave easy exercises",
        ))

    if not any(thresholds.challenge_token in c.source for c in cells):
        findings.append(LintFinding(
            "D6_challenges", "info",
            f"no cell mentions {thresholds.challenge_token!r}; "
            "add challenge questions or tasks",
        ))

    return findings
