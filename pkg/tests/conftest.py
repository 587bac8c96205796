from __future__ import annotations

import pathlib
import re

import pytest

FIXTURES = pathlib.Path(__file__).parent / "fixtures"


def assert_no_executable_vectors(fragment: str) -> None:
    lowered = fragment.lower()
    assert "<script" not in lowered
    assert "<iframe" not in lowered and "<object" not in lowered and "<embed" not in lowered
    # Event handlers inside real tags (escaped text shows as &lt;...).
    assert not re.search(r"<[^>]*\son\w+\s*=", lowered)
    # Dangerous schemes inside real attribute values. The sanitizer emits
    # double-quoted attributes; escaped text renders quotes as &quot;.
    compact = re.sub(r"[\s\x00-\x1f]", "", lowered)
    assert not re.search(r'(href|src)="[^"]*(javascript|vbscript|data:text)', compact)


@pytest.fixture(scope="session")
def fixtures_dir() -> pathlib.Path:
    return FIXTURES


@pytest.fixture(scope="session")
def corpus_paths() -> list[pathlib.Path]:
    paths = sorted(FIXTURES.glob("*.ipynb"))
    assert len(paths) >= 10, "fixture corpus must hold at least 10 notebooks"
    return paths


def fixture_bytes(name: str) -> bytes:
    return (FIXTURES / name).read_bytes()


# --- shared grading helpers ---------------------------------------------------
# Student-answer sources for the functions homework, plus a scripted rule
# table whose test outcomes depend on which implementations actually ran.

IMPL_ADD_OK = "def add(a, b):\n    return a + b\n"
IMPL_MUL_OK = "def mul(a, b):\n    return a * b\n"
IMPL_MUL_BAD = "def mul(a, b):\n    return a + b\n"

GOOD_IMPLS = {"add-impl": IMPL_ADD_OK, "mul-impl": IMPL_MUL_OK}
PARTIAL_IMPLS = {"add-impl": IMPL_ADD_OK, "mul-impl": IMPL_MUL_BAD}


def course_rules():
    """Rules keyed on exact correct sources; wrong answers fail their asserts."""
    from nbcampus.executor import ScriptedRule

    return (
        ScriptedRule(exact=IMPL_ADD_OK, sets=frozenset({"add-ok"})),
        ScriptedRule(exact=IMPL_MUL_OK, sets=frozenset({"mul-ok"})),
        ScriptedRule(contains="assert add", requires=frozenset({"add-ok"})),
        ScriptedRule(contains="assert mul", requires=frozenset({"mul-ok"})),
        ScriptedRule(contains="assert add", status="error",
                     error=("AssertionError", "assert add(2, 3) == 5")),
        ScriptedRule(contains="assert mul", status="error",
                     error=("AssertionError", "assert mul(2, 3) == 6")),
    )


def fill_solutions(nb, impls: dict[str, str]):
    """Student work: swap named answer cells' sources, leave everything else."""
    import copy
    from dataclasses import replace

    from nbcampus.notebook import Notebook

    cells = []
    for cell in nb.cells:
        meta = cell.grading
        if meta is not None and meta.grade_id in impls:
            cells.append(replace(cell, source=impls[meta.grade_id]))
        else:
            cells.append(cell)
    return Notebook(tuple(cells), copy.deepcopy(nb.metadata),
                    nb.format_major, nb.format_minor)
