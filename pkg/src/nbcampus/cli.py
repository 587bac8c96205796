"""Command-line surface: offline notebook workflows plus the service runner.

Exit codes: 0 success, 1 operational failure (network, bad input files,
grading machinery), 2 usage errors (click's own). `grade` exits 0 whenever a
report was produced; pass --require-full to fail the exit code on anything
less than full marks. `lint` exits 0 unless --strict is set and a
warn-severity finding exists.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from .course import build_sequence, export_bundle, parse_manifest
from .errors import NbCampusError
from .executor import ScriptedExecutor, default_environments, worker_available
from .fetch import FetchRequest, Fetcher
from .grading import (
    ExecutionLimits,
    GradeReport,
    extract_assignment,
    release_student_copy,
    sanitize_and_grade,
)
from .lint import lint_notebook
from .notebook import SliceSpec, load_notebook, save_notebook, slice_notebook
from .render import RenderOptions, render_notebook, render_page


def _operational(fn):
    """Map domain and file errors to exit code 1 with a clean message."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (NbCampusError, OSError) as exc:
            raise click.ClickException(str(exc)) from exc

    return wrapper


@click.group()
@click.version_option(package_name="nbcampus")
def main() -> None:
    """Course toolchain for public Jupyter notebooks."""


@main.command()
@click.argument("url")
@click.option("-o", "--output", type=click.Path(dir_okay=False, path_type=Path),
              help="Write the notebook here instead of stdout.")
@click.option("--pin", help="Require this SHA-256 content digest.")
@click.option("--max-age", type=float, default=None,
              help="Serve a cache hit younger than this many seconds without revalidating.")
@click.option("--offline", is_flag=True, help="Never touch the network; cache only.")
@_operational
def fetch(url: str, output: Path | None, pin: str | None,
          max_age: float | None, offline: bool) -> None:
    """Fetch a notebook URL through the local cache."""
    request = FetchRequest(url=url, pin=pin, offline=offline,
                           **({"max_age": max_age} if max_age is not None else {}))
    result = Fetcher().fetch(request)
    if output is None:
        click.get_binary_stream("stdout").write(result.content)
    else:
        output.write_bytes(result.content)
        click.echo(f"{result.url} -> {output} ({result.source}, sha256 {result.digest[:12]})")


@main.command(name="slice")
@click.argument("notebook", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--start", "start_mark", help="First cell containing this text starts the slice.")
@click.option("--end", "end_mark", help="First later cell containing this text ends it (exclusive).")
@click.option("-o", "--output", required=True,
              type=click.Path(dir_okay=False, path_type=Path))
@_operational
def slice_cmd(notebook: Path, start_mark: str | None, end_mark: str | None,
              output: Path) -> None:
    """Cut a cell range out of a notebook by start/end marks."""
    nb = load_notebook(notebook)
    sliced = slice_notebook(nb, SliceSpec(start_mark, end_mark))
    save_notebook(sliced, output)
    click.echo(f"{len(sliced.cells)} of {len(nb.cells)} cells -> {output}")


@main.command()
@click.argument("notebook", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("-o", "--output", required=True,
              type=click.Path(dir_okay=False, path_type=Path))
@click.option("--fragment", is_flag=True,
              help="Emit the bare fragment instead of a standalone page.")
@click.option("--no-inputs", is_flag=True, help="Hide code cell inputs.")
@click.option("--no-outputs", is_flag=True, help="Hide stored outputs.")
@_operational
def render(notebook: Path, output: Path, fragment: bool,
           no_inputs: bool, no_outputs: bool) -> None:
    """Render a notebook to sanitized HTML."""
    nb = load_notebook(notebook)
    result = render_notebook(nb, RenderOptions(show_inputs=not no_inputs,
                                               show_outputs=not no_outputs))
    html = result.html if fragment else render_page(result, title=notebook.stem)
    output.write_text(html, encoding="utf-8")
    for warning in result.warnings:
        click.echo(f"warning: {warning}", err=True)
    click.echo(f"rendered {len(nb.cells)} cells -> {output}")


@main.group()
def course() -> None:
    """Manifest-driven course building."""


@course.command()
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("-o", "--output", "out_dir", required=True,
              type=click.Path(file_okay=False, path_type=Path))
@click.option("--lenient", is_flag=True, help="Warn on unknown manifest keys instead of failing.")
@_operational
def build(manifest: Path, out_dir: Path, lenient: bool) -> None:
    """Build a course: fetch, slice, render, release; write the static bundle."""
    parsed = parse_manifest(manifest.read_bytes(), strict=not lenient)
    for warning in parsed.warnings:
        click.echo(f"warning: {warning}", err=True)
    bundle = build_sequence(parsed, base_dir=manifest.parent)
    export_bundle(bundle, out_dir)
    for unit in bundle.units:
        click.echo(f"built {unit.unit_id} ({unit.kind}) sha256 {unit.source_digest[:12]}")
    click.echo(f"bundle -> {out_dir}")


@course.command()
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--lenient", is_flag=True)
@_operational
def validate(manifest: Path, lenient: bool) -> None:
    """Parse and validate a manifest without building anything."""
    parsed = parse_manifest(manifest.read_bytes(), strict=not lenient)
    for warning in parsed.warnings:
        click.echo(f"warning: {warning}", err=True)
    units = sum(len(m.units) for m in parsed.modules)
    click.echo(f"ok: {parsed.course_id}, {len(parsed.modules)} module(s), {units} unit(s)")


@main.command()
@click.argument("notebook", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--strict", is_flag=True, help="Exit 1 when warn-severity findings exist.")
@click.option("--max-code-run", type=int, default=None,
              help="Override the consecutive-code-cell limit.")
@_operational
def lint(notebook: Path, strict: bool, max_code_run: int | None) -> None:
    """Check a lesson notebook against the teaching-pattern rules."""
    from .lint import LintThresholds

    thresholds = LintThresholds() if max_code_run is None \
        else LintThresholds(max_consecutive_code=max_code_run)
    findings = lint_notebook(load_notebook(notebook), thresholds)
    if not findings:
        click.echo("no findings")
        return
    for f in findings:
        place = f" cell {f.cell_index}" if f.cell_index is not None else ""
        click.echo(f"{f.severity} {f.rule_id}{place}: {f.message}")
    if strict and any(f.severity == "warn" for f in findings):
        sys.exit(1)


@main.command()
@click.argument("notebook", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("-o", "--output", required=True,
              type=click.Path(dir_okay=False, path_type=Path))
@_operational
def release(notebook: Path, output: Path) -> None:
    """Produce the student copy: solution regions stubbed, outputs cleared."""
    nb = load_notebook(notebook)
    spec = extract_assignment(nb, notebook.stem)
    save_notebook(release_student_copy(spec), output)
    click.echo(f"released {notebook} -> {output} "
               f"({len(spec.test_cells)} tests, {spec.points_possible:g} points)")


def _cli_executor(kind: str):
    if kind == "auto":
        kind = "subprocess" if worker_available() else "fake"
    if kind == "fake":
        return ScriptedExecutor()
    environments = default_environments()
    if not environments:
        raise click.ClickException(
            "no worker runtime found; install one or pass --executor fake")
    from .executor import SubprocessExecutor

    return SubprocessExecutor(environments["default"])


@main.command()
@click.option("--assignment", "assignment_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Instructor notebook defining tests and points.")
@click.option("--submission", "submission_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--executor", "executor_kind",
              type=click.Choice(["fake", "subprocess", "auto"]), default="auto",
              show_default=True)
@click.option("--cell-timeout", type=float, default=ExecutionLimits().cell_timeout_s,
              show_default=True)
@click.option("--total-timeout", type=float, default=ExecutionLimits().total_timeout_s,
              show_default=True)
@click.option("--require-full", is_flag=True,
              help="Exit 1 unless the submission earns every point.")
@click.option("--json", "as_json", is_flag=True, help="Print the report as JSON.")
@_operational
def grade(assignment_path: Path, submission_path: Path, executor_kind: str,
          cell_timeout: float, total_timeout: float, require_full: bool,
          as_json: bool) -> None:
    """Sanitize and grade one submission; print the score table."""
    spec = extract_assignment(load_notebook(assignment_path), assignment_path.stem)
    submission = load_notebook(submission_path)
    session = _cli_executor(executor_kind)
    try:
        report = sanitize_and_grade(submission, spec, session,
                                    ExecutionLimits(cell_timeout, total_timeout))
    finally:
        session.shutdown()
    if as_json:
        click.echo(json.dumps(report.to_json(), indent=2, sort_keys=True))
    else:
        _print_table(report)
    if require_full and report.earned < report.possible:
        sys.exit(1)


def _print_table(report: GradeReport) -> None:
    width = max((len(r.grade_id) for r in report.rows), default=4)
    for row in report.rows:
        mark = "pass" if row.passed else "FAIL"
        note = f"  {row.message}" if row.message else ""
        click.echo(f"{row.grade_id:<{width}}  {row.earned:g}/{row.points:g}  {mark}{note}")
    click.echo(f"{'total':<{width}}  {report.earned:g}/{report.possible:g}  "
               f"tampered: {'yes' if report.tampered else 'no'}")


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@_operational
def serve(config_path: Path) -> None:
    """Run the grading service described by a YAML config file."""
    from .service import load_config, serve as run_service

    run_service(load_config(config_path))


if __name__ == "__main__":
    main()
