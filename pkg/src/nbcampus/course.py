"""Course manifests, sequence building, and static export.

A manifest (YAML preferred, JSON accepted, ``schema: 1``) declares modules of
ordered units. Content units name a notebook source plus slice marks and come
out as sanitized HTML; assignment units come out as a released student
notebook plus the grading structure extracted from the instructor original.
Building is all-or-nothing: the first failing unit aborts with its unit_id.
"""

from __future__ import annotations

import hashlib
import html as html_lib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator, Mapping

import yaml

from .errors import (
    BuildError,
    DuplicateId,
    MalformedManifest,
    MissingField,
    NbCampusError,
)
from .fetch import FetchRequest, Fetcher, sha256_hex
from .grading import AssignmentSpec, extract_assignment, release_student_copy
from .notebook import (
    Notebook,
    SliceSpec,
    parse_notebook,
    serialize_notebook,
    slice_notebook,
)
from .render import RenderOptions, render_notebook, render_page

MANIFEST_SCHEMA = 1

_SLUG_OK = frozenset("abcdefghijklmnopqrstuvwxyz0123456789-_")


def _check_slug(value: Any, what: str) -> str:
    if not isinstance(value, str) or not value:
        raise MalformedManifest(f"{what} must be a non-empty string")
    if set(value.lower()) - _SLUG_OK or value[0] in "-_":
        raise MalformedManifest(f"{what} {value!r} is not a slug")
    return value


@dataclass(frozen=True)
class AssignmentConfig:
    points_possible: float | None = None
    time_limit_s: float | None = None
    environment: str = "default"


@dataclass(frozen=True)
class UnitSpec:
    unit_id: str
    title: str
    source: str
    slice: SliceSpec = SliceSpec()
    kind: str = "content"  # content | assignment
    assignment: AssignmentConfig | None = None


@dataclass(frozen=True)
class ModuleSpec:
    module_id: str
    title: str
    units: tuple[UnitSpec, ...]


@dataclass(frozen=True)
class CourseManifest:
    course_id: str
    title: str
    modules: tuple[ModuleSpec, ...]
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def iter_units(self) -> Iterator[tuple[ModuleSpec, UnitSpec]]:
        for module in self.modules:
            for unit in module.units:
                yield module, unit


def _reject_unknown(obj: Mapping[str, Any], allowed: set[str], where: str,
                    strict: bool, warnings: list[str]) -> None:
    unknown = sorted(set(obj) - allowed)
    if not unknown:
        return
    message = f"{where}: unknown key(s) {', '.join(unknown)}"
    if strict:
        raise MalformedManifest(message)
    warnings.append(message)


def _require(obj: Mapping[str, Any], key: str, where: str) -> Any:
    if key not in obj:
        raise MissingField(f"{where}: missing required field {key!r}")
    return obj[key]


def _text(value: Any, what: str) -> str:
    if not isinstance(value, str) or not value.strip():
        raise MalformedManifest(f"{what} must be a non-empty string")
    return value


def _number(value: Any, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MalformedManifest(f"{what} must be a number")
    return float(value)


def _parse_slice(obj: Any, where: str, strict: bool, warnings: list[str]) -> SliceSpec:
    if obj is None:
        return SliceSpec()
    if not isinstance(obj, Mapping):
        raise MalformedManifest(f"{where}: slice must be a mapping")
    _reject_unknown(obj, {"start", "end"}, f"{where}.slice", strict, warnings)
    start = obj.get("start")
    end = obj.get("end")
    for name, mark in (("start", start), ("end", end)):
        if mark is not None and (not isinstance(mark, str) or not mark):
            raise MalformedManifest(f"{where}: slice {name} must be a non-empty string")
    return SliceSpec(start, end)


def _parse_assignment(obj: Any, where: str, strict: bool,
                      warnings: list[str]) -> AssignmentConfig:
    if not isinstance(obj, Mapping):
        raise MalformedManifest(f"{where}: assignment must be a mapping")
    _reject_unknown(obj, {"points_possible", "time_limit_s", "environment"},
                    f"{where}.assignment", strict, warnings)
    points = obj.get("points_possible")
    limit = obj.get("time_limit_s")
    return AssignmentConfig(
        points_possible=None if points is None else _number(points, f"{where} points_possible"),
        time_limit_s=None if limit is None else _number(limit, f"{where} time_limit_s"),
        environment=_text(obj.get("environment", "default"), f"{where} environment"),
    )


_UNIT_KEYS = {"unit_id", "title", "source", "slice", "kind", "assignment"}


def _parse_unit(obj: Any, where: str, strict: bool, warnings: list[str]) -> UnitSpec:
    if not isinstance(obj, Mapping):
        raise MalformedManifest(f"{where}: unit must be a mapping")
    _reject_unknown(obj, _UNIT_KEYS, where, strict, warnings)
    unit_id = _check_slug(_require(obj, "unit_id", where), f"{where} unit_id")
    kind = obj.get("kind", "content")
    if kind not in ("content", "assignment"):
        raise MalformedManifest(f"{where}: kind must be 'content' or 'assignment'")
    assignment_obj = obj.get("assignment")
    if kind == "assignment" and assignment_obj is None:
        raise MissingField(f"{where}: assignment units need an assignment block")
    if kind == "content" and assignment_obj is not None:
        raise MalformedManifest(f"{where}: content units must not carry an assignment block")
    return UnitSpec(
        unit_id=unit_id,
        title=_text(_require(obj, "title", where), f"{where} title"),
        source=_text(_require(obj, "source", where), f"{where} source"),
        slice=_parse_slice(obj.get("slice"), where, strict, warnings),
        kind=kind,
        assignment=None if assignment_obj is None
        else _parse_assignment(assignment_obj, where, strict, warnings),
    )


def parse_manifest(data: bytes | str, *, strict: bool = True) -> CourseManifest:
    """Parse and validate a course manifest document.

    Strict mode rejects unknown keys; lenient mode records them as warnings
    on the returned manifest. Unit ids must be unique across the whole
    course, not just within their module, because they name build artifacts
    and URL paths.
    """
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedManifest(f"manifest is not UTF-8: {exc}") from exc
    try:
        doc = yaml.safe_load(data)
    except yaml.YAMLError as exc:
        raise MalformedManifest(f"manifest is not valid YAML/JSON: {exc}") from exc
    if not isinstance(doc, Mapping):
        raise MalformedManifest("manifest root must be a mapping")

    warnings: list[str] = []
    _reject_unknown(doc, {"schema", "course_id", "title", "modules"},
                    "manifest", strict, warnings)
    schema = doc.get("schema")
    if schema is None:
        if strict:
            raise MissingField("manifest: missing required field 'schema'")
        warnings.append("manifest: no schema key, assuming schema 1")
    elif schema != MANIFEST_SCHEMA:
        raise MalformedManifest(f"unsupported manifest schema {schema!r}")

    course_id = _check_slug(_require(doc, "course_id", "manifest"), "course_id")
    title = _text(_require(doc, "title", "manifest"), "course title")
    modules_obj = _require(doc, "modules", "manifest")
    if not isinstance(modules_obj, list) or not modules_obj:
        raise MalformedManifest("manifest: modules must be a non-empty list")

    modules: list[ModuleSpec] = []
    seen_modules: set[str] = set()
    seen_units: set[str] = set()
    for m_index, m_obj in enumerate(modules_obj):
        where = f"modules[{m_index}]"
        if not isinstance(m_obj, Mapping):
            raise MalformedManifest(f"{where}: module must be a mapping")
        _reject_unknown(m_obj, {"module_id", "title", "units"}, where, strict, warnings)
        module_id = _check_slug(_require(m_obj, "module_id", where), f"{where} module_id")
        if module_id in seen_modules:
            raise DuplicateId(f"module_id {module_id!r} appears more than once")
        seen_modules.add(module_id)
        units_obj = _require(m_obj, "units", where)
        if not isinstance(units_obj, list) or not units_obj:
            raise MalformedManifest(f"{where}: units must be a non-empty list")
        units: list[UnitSpec] = []
        for u_index, u_obj in enumerate(units_obj):
            unit = _parse_unit(u_obj, f"{where}.units[{u_index}]", strict, warnings)
            if unit.unit_id in seen_units:
                raise DuplicateId(f"unit_id {unit.unit_id!r} appears more than once")
            seen_units.add(unit.unit_id)
            units.append(unit)
        modules.append(ModuleSpec(module_id, _text(_require(m_obj, "title", where),
                                                   f"{where} title"), tuple(units)))
    return CourseManifest(course_id, title, tuple(modules), tuple(warnings))


def load_manifest(path: str | Path, *, strict: bool = True) -> CourseManifest:
    return parse_manifest(Path(path).read_bytes(), strict=strict)


# --- building --------------------------------------------------------------------

@dataclass(frozen=True)
class BuiltUnit:
    unit_id: str
    module_id: str
    title: str
    kind: str
    html: str
    source_digest: str
    warnings: tuple[str, ...] = ()
    released: Notebook | None = None
    assignment: AssignmentSpec | None = None
    time_limit_s: float | None = None


@dataclass(frozen=True)
class SequenceBundle:
    course_id: str
    title: str
    units: tuple[BuiltUnit, ...]
    manifest: CourseManifest

    @property
    def assignments(self) -> dict[str, AssignmentSpec]:
        return {u.unit_id: u.assignment for u in self.units if u.assignment is not None}

    def unit(self, unit_id: str) -> BuiltUnit | None:
        for u in self.units:
            if u.unit_id == unit_id:
                return u
        return None


def _load_source(source: str, fetcher: Fetcher | None, base_dir: Path | None) -> bytes:
    if source.startswith(("http://", "https://")):
        result = (fetcher or Fetcher()).fetch(FetchRequest(url=source))
        return result.content
    path = Path(source)
    if not path.is_absolute() and base_dir is not None:
        path = base_dir / path
    return path.read_bytes()


def _anchor_prefix(unit_id: str) -> str:
    # Unit ids may start with a digit; heading anchors may not.
    return f"unit-{unit_id}"


def build_sequence(
    manifest: CourseManifest,
    *,
    fetcher: Fetcher | None = None,
    base_dir: str | Path | None = None,
    render_options: RenderOptions | None = None,
) -> SequenceBundle:
    """Assemble every unit in manifest order; first failure aborts the build."""
    base = Path(base_dir) if base_dir is not None else None
    units: list[BuiltUnit] = []
    for module, unit in manifest.iter_units():
        try:
            units.append(_build_unit(module, unit, fetcher, base, render_options))
        except BuildError:
            raise
        except (NbCampusError, OSError) as exc:
            raise BuildError(unit.unit_id, exc) from exc
    return SequenceBundle(manifest.course_id, manifest.title, tuple(units), manifest)


def _build_unit(
    module: ModuleSpec,
    unit: UnitSpec,
    fetcher: Fetcher | None,
    base_dir: Path | None,
    render_options: RenderOptions | None,
) -> BuiltUnit:
    raw = _load_source(unit.source, fetcher, base_dir)
    digest = sha256_hex(raw)
    nb = parse_notebook(raw)
    opts = render_options or RenderOptions()
    opts = RenderOptions(
        show_inputs=opts.show_inputs,
        show_outputs=opts.show_outputs,
        anchor_prefix=_anchor_prefix(unit.unit_id),
        code_language_hint=opts.code_language_hint,
    )

    if unit.kind == "content":
        sliced = slice_notebook(nb, unit.slice)
        fragment = render_notebook(sliced, opts)
        return BuiltUnit(unit.unit_id, module.module_id, unit.title, unit.kind,
                         fragment.html, digest, tuple(fragment.warnings))

    sliced = slice_notebook(nb, unit.slice)
    config = unit.assignment or AssignmentConfig()
    spec = extract_assignment(sliced, unit.unit_id, config.environment)
    if (config.points_possible is not None
            and config.points_possible != spec.points_possible):
        raise BuildError(unit.unit_id, MalformedManifest(
            f"manifest says {config.points_possible} points but the notebook "
            f"defines {spec.points_possible}"))
    released = release_student_copy(spec)
    fragment = render_notebook(released, opts)
    return BuiltUnit(unit.unit_id, module.module_id, unit.title, unit.kind,
                     fragment.html, digest, tuple(fragment.warnings),
                     released=released, assignment=spec,
                     time_limit_s=config.time_limit_s)


# --- static export -----------------------------------------------------------------

def _index_page(bundle: SequenceBundle) -> str:
    items = []
    for module in bundle.manifest.modules:
        items.append(f'<li class="module">{html_lib.escape(module.title)}<ul>')
        for unit in module.units:
            built = bundle.unit(unit.unit_id)
            label = html_lib.escape(built.title)
            badge = " (assignment)" if built.kind == "assignment" else ""
            items.append(
                f'<li><a href="units/{built.unit_id}.html">{label}</a>{badge}</li>'
            )
        items.append("</ul></li>")
    body = "\n".join(items)
    title = html_lib.escape(bundle.title)
    return (
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n"
        f"<title>{title}</title>\n</head>\n<body>\n<h1>{title}</h1>\n"
        f"<ul class=\"sequence\">\n{body}\n</ul>\n</body>\n</html>\n"
    )


def bundle_manifest_json(bundle: SequenceBundle) -> dict[str, Any]:
    units = []
    for u in bundle.units:
        record: dict[str, Any] = {
            "unit_id": u.unit_id,
            "module_id": u.module_id,
            "title": u.title,
            "kind": u.kind,
            "source_digest": u.source_digest,
            "html_path": f"units/{u.unit_id}.html",
        }
        if u.assignment is not None:
            record["points_possible"] = u.assignment.points_possible
            record["release_path"] = f"assignments/{u.unit_id}/released.ipynb"
            record["spec_path"] = f"assignments/{u.unit_id}/spec.json"
        units.append(record)
    return {
        "schema": MANIFEST_SCHEMA,
        "course_id": bundle.course_id,
        "title": bundle.title,
        "modules": [
            {"module_id": m.module_id, "title": m.title,
             "units": [u.unit_id for u in m.units]}
            for m in bundle.manifest.modules
        ],
        "units": units,
    }


def export_bundle(bundle: SequenceBundle, out_dir: str | Path) -> Path:
    """Write the static site: per-unit pages, an index, and bundle.json.

    Output is a pure function of the bundle (no timestamps), so rebuilding
    from pinned sources reproduces every file byte for byte.
    """
    out = Path(out_dir)
    (out / "units").mkdir(parents=True, exist_ok=True)
    for u in bundle.units:
        page = render_page(u.html, title=u.title)
        (out / "units" / f"{u.unit_id}.html").write_text(page, encoding="utf-8")
        if u.assignment is not None:
            a_dir = out / "assignments" / u.unit_id
            a_dir.mkdir(parents=True, exist_ok=True)
            (a_dir / "released.ipynb").write_bytes(serialize_notebook(u.released))
            spec_text = json.dumps(u.assignment.to_json(), indent=2, sort_keys=True) + "\n"
            (a_dir / "spec.json").write_text(spec_text, encoding="utf-8")
    (out / "index.html").write_text(_index_page(bundle), encoding="utf-8")
    doc = json.dumps(bundle_manifest_json(bundle), indent=2, sort_keys=True) + "\n"
    (out / "bundle.json").write_text(doc, encoding="utf-8")
    return out
