from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nbcampus import notebook as nbc
from nbcampus.errors import StartMarkNotFound


def _nb(*sources: str) -> nbc.Notebook:
    return nbc.new_notebook([nbc.markdown_cell(s) for s in sources])


LESSON = _nb("# Intro", "## Step 1", "code a", "## Step 2", "code b")


def test_slice_between_marks():
    out = nbc.slice_notebook(LESSON, nbc.SliceSpec("## Step 1", "## Step 2"))
    assert [c.source for c in out.cells] == ["## Step 1", "code a"]


def test_slice_to_end_when_end_mark_missing():
    out = nbc.slice_notebook(LESSON, nbc.SliceSpec("## Step 2", "## Step 9"))
    assert [c.source for c in out.cells] == ["## Step 2", "code b"]


def test_no_marks_is_identity():
    out = nbc.slice_notebook(LESSON, nbc.SliceSpec())
    assert out.cells == LESSON.cells
    assert out.metadata == LESSON.metadata


def test_missing_start_mark_raises():
    with pytest.raises(StartMarkNotFound):
        nbc.slice_notebook(LESSON, nbc.SliceSpec("## Step 7", None))


def test_end_mark_before_start_is_ignored():
    nb = _nb("END", "a", "START", "b")
    out = nbc.slice_notebook(nb, nbc.SliceSpec("START", "END"))
    assert [c.source for c in out.cells] == ["START", "b"]


def test_start_cell_containing_end_mark_yields_empty_slice():
    nb = _nb("a", "START END", "b")
    out = nbc.slice_notebook(nb, nbc.SliceSpec("START", "END"))
    assert out.cells == ()


def test_match_is_case_sensitive_substring():
    nb = _nb("## step 1", "body")
    with pytest.raises(StartMarkNotFound):
        nbc.slice_notebook(nb, nbc.SliceSpec("## Step 1"))
    out = nbc.slice_notebook(nb, nbc.SliceSpec("step 1"))
    assert len(out.cells) == 2


def test_empty_marks_rejected_at_construction():
    with pytest.raises(ValueError):
        nbc.SliceSpec(start_mark="")
    with pytest.raises(ValueError):
        nbc.SliceSpec(end_mark="")


def test_slice_works_on_code_and_raw_cells():
    nb = nbc.new_notebook([
        nbc.code_cell("# MARK setup\nx = 1"),
        nbc.raw_cell("between"),
        nbc.code_cell("# MARK teardown"),
    ])
    out = nbc.slice_notebook(nb, nbc.SliceSpec("MARK setup", "MARK teardown"))
    assert [c.source for c in out.cells] == ["# MARK setup\nx = 1", "between"]


def _partition_case(rng: random.Random):
    n_cells = rng.randint(1, 50)
    k = rng.randint(1, min(5, n_cells))
    sources = [f"cell body {i} " + "x" * rng.randint(0, 5) for i in range(n_cells)]
    mark_cells = sorted(rng.sample(range(n_cells), k))
    marks = []
    for j, idx in enumerate(mark_cells):
        token = f"@@mark-{j}@@"
        sources[idx] += "\n" + token
        marks.append(token)
    return nbc.new_notebook([nbc.markdown_cell(s) for s in sources]), marks


def partition_slices(nb: nbc.Notebook, marks: list[str]) -> list[nbc.Notebook]:
    """Head slice, one slice per consecutive mark pair, tail slice."""
    parts = [nbc.slice_notebook(nb, nbc.SliceSpec(None, marks[0]))]
    for a, b in zip(marks, marks[1:]):
        parts.append(nbc.slice_notebook(nb, nbc.SliceSpec(a, b)))
    parts.append(nbc.slice_notebook(nb, nbc.SliceSpec(marks[-1], None)))
    return parts


def test_partition_property_seeded_sample():
    rng = random.Random(20260815)
    for _ in range(100):
        nb, marks = _partition_case(rng)
        parts = partition_slices(nb, marks)
        recombined = [c for p in parts for c in p.cells]
        assert tuple(recombined) == nb.cells


@settings(max_examples=60, deadline=None)
@given(
    data=st.data(),
    n_cells=st.integers(min_value=1, max_value=30),
    k=st.integers(min_value=1, max_value=5),
)
def test_partition_property_hypothesis(data, n_cells, k):
    k = min(k, n_cells)
    mark_cells = sorted(data.draw(st.sets(
        st.integers(min_value=0, max_value=n_cells - 1), min_size=k, max_size=k)))
    sources = [f"body {i}" for i in range(n_cells)]
    marks = []
    for j, idx in enumerate(mark_cells):
        token = f"<mark:{j}>"
        sources[idx] = f"{sources[idx]}\n{token}"
        marks.append(token)
    nb = nbc.new_notebook([nbc.markdown_cell(s) for s in sources])
    recombined = [c for p in partition_slices(nb, marks) for c in p.cells]
    assert tuple(recombined) == nb.cells
