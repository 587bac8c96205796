"""Render notebook documents to sanitized, self-contained HTML fragments.

Markdown cells go through CommonMark (tables enabled) and then the HTML
sanitizer; ``$...$`` / ``$$...$$`` math spans are lifted out beforehand and
re-inserted verbatim (entity-escaped only) so a client-side typesetter can
process them. Code cells become escaped ``<pre><code class="language-...">``
blocks for client-side highlighting. Stored outputs render by fixed mime
precedence: text/html (sanitized) > image/svg+xml (sanitized) > image/png
(inline data URI) > text/plain (escaped). Rendering is pure: equal inputs
produce byte-equal fragments, and fragments never reference external assets.

Class names: ``nb-notebook`` wraps a whole notebook; each cell is
``nb-cell nb-cell-{markdown,code,raw}``; code inputs are ``nb-input``;
outputs are ``nb-output`` plus one of ``nb-output-stream-{stdout,stderr}``,
``nb-output-error``, ``nb-output-html``, ``nb-output-svg``,
``nb-output-image``, ``nb-output-text``. ANSI styling uses ``ansi-bold``
and ``ansi-[bright-]{black,red,green,yellow,blue,magenta,cyan,white}``.
Headings carry ``id="{anchor_prefix}-{slug}"`` anchors.
"""

from __future__ import annotations

import hashlib
import html
import re
from dataclasses import dataclass

from markdown_it import MarkdownIt

from .ansi import ansi_to_html
from .notebook import Cell, CellKind, Notebook, Output, OutputKind
from .sanitize import sanitize_html, sanitize_svg

MIME_PRECEDENCE = ("text/html", "image/svg+xml", "image/png", "text/plain")

_ANCHOR_PREFIX_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_-]*$")
_BLOCK_MATH_RE = re.compile(r"\$\$.+?\$\$", re.DOTALL)
_INLINE_MATH_RE = re.compile(r"\$(?!\s)(?:[^$\n]*?[^$\s])?\$")
_BASE64_RE = re.compile(r"^[A-Za-z0-9+/]*={0,2}$")

_MD = MarkdownIt("commonmark").enable("table").enable("strikethrough")


@dataclass(frozen=True)
class RenderOptions:
    show_inputs: bool = True
    show_outputs: bool = True
    anchor_prefix: str = "nb"
    code_language_hint: str = "python"

    def __post_init__(self) -> None:
        if not _ANCHOR_PREFIX_RE.match(self.anchor_prefix):
            raise ValueError(f"invalid anchor prefix {self.anchor_prefix!r}")


@dataclass(frozen=True)
class HtmlFragment:
    html: str
    warnings: tuple[str, ...] = ()


class _Slugger:
    """Deduplicating heading-slug registry, one per rendered document."""

    def __init__(self) -> None:
        self.seen: dict[str, int] = {}

    def slug(self, text: str) -> str:
        base = re.sub(r"[^\w\s-]", "", text).strip().lower()
        base = re.sub(r"[\s_]+", "-", base) or "section"
        count = self.seen.get(base, 0)
        self.seen[base] = count + 1
        return base if count == 0 else f"{base}-{count + 1}"


def _protect_math(source: str) -> tuple[str, dict[str, str]]:
    """Replace math spans with inert alphanumeric tokens before markdown."""
    digest = hashlib.sha1(source.encode("utf-8")).hexdigest()[:8]
    spans: dict[str, str] = {}

    def stash(match: re.Match) -> str:
        token = f"xmath{digest}n{len(spans)}x"
        spans[token] = match.group(0)
        return token

    protected = _BLOCK_MATH_RE.sub(stash, source)
    protected = _INLINE_MATH_RE.sub(stash, protected)
    return protected, spans


def _restore_math(rendered: str, spans: dict[str, str]) -> str:
    for token, original in spans.items():
        rendered = rendered.replace(token, html.escape(original, quote=False))
    return rendered


def _render_markdown(source: str, opts: RenderOptions, slugger: _Slugger) -> str:
    protected, spans = _protect_math(source)
    tokens = _MD.parse(protected)
    for i, token in enumerate(tokens):
        if token.type == "heading_open" and i + 1 < len(tokens):
            text = tokens[i + 1].content
            for tok, original in spans.items():
                text = text.replace(tok, original)
            token.attrSet("id", f"{opts.anchor_prefix}-{slugger.slug(text)}")
    rendered = _MD.renderer.render(tokens, _MD.options, {})
    return _restore_math(sanitize_html(rendered), spans)


def select_mime(output: Output) -> tuple[str, str] | None:
    """Pick the best renderable payload, or None when nothing fits."""
    for mime in MIME_PRECEDENCE:
        payload = output.data.get(mime)
        if isinstance(payload, str) and payload:
            return mime, payload
    return None


def _render_output(output: Output, index: int, warnings: list[str]) -> str:
    if output.kind is OutputKind.STREAM:
        name = "stderr" if output.name == "stderr" else "stdout"
        return (
            f'<pre class="nb-output nb-output-stream-{name}">'
            f"{ansi_to_html(output.text or '')}</pre>"
        )
    if output.kind is OutputKind.ERROR:
        text = "\n".join(output.traceback) if output.traceback else f"{output.ename}: {output.evalue}"
        return f'<pre class="nb-output nb-output-error">{ansi_to_html(text)}</pre>'

    chosen = select_mime(output)
    if chosen is None:
        warnings.append(f"output {index}: no renderable mime type")
        return ""
    mime, payload = chosen
    if mime == "text/html":
        return f'<div class="nb-output nb-output-html">{sanitize_html(payload)}</div>'
    if mime == "image/svg+xml":
        return f'<div class="nb-output nb-output-svg">{sanitize_svg(payload)}</div>'
    if mime == "image/png":
        data = "".join(payload.split())
        if not _BASE64_RE.match(data):
            warnings.append(f"output {index}: image/png payload is not base64")
            return ""
        return (
            f'<div class="nb-output nb-output-image">'
            f'<img src="data:image/png;base64,{data}" alt=""/></div>'
        )
    return f'<pre class="nb-output nb-output-text">{html.escape(payload, quote=False)}</pre>'


def _render_cell(cell: Cell, opts: RenderOptions, slugger: _Slugger) -> HtmlFragment:
    warnings: list[str] = []
    parts: list[str] = []
    if cell.kind is CellKind.MARKDOWN:
        parts.append(_render_markdown(cell.source, opts, slugger))
        kind_class = "markdown"
    elif cell.kind is CellKind.RAW:
        parts.append(f'<pre class="nb-raw">{html.escape(cell.source, quote=False)}</pre>')
        kind_class = "raw"
    else:
        kind_class = "code"
        if opts.show_inputs:
            parts.append(
                f'<pre class="nb-input"><code class="language-{opts.code_language_hint}">'
                f"{html.escape(cell.source, quote=False)}</code></pre>"
            )
        if opts.show_outputs and cell.outputs:
            rendered = [_render_output(o, i, warnings) for i, o in enumerate(cell.outputs)]
            rendered = [r for r in rendered if r]
            if rendered:
                parts.append('<div class="nb-outputs">' + "".join(rendered) + "</div>")
    body = "".join(parts)
    return HtmlFragment(f'<div class="nb-cell nb-cell-{kind_class}">{body}</div>', tuple(warnings))


def render_cell(cell: Cell, opts: RenderOptions = RenderOptions()) -> HtmlFragment:
    return _render_cell(cell, opts, _Slugger())


def render_notebook(nb: Notebook, opts: RenderOptions = RenderOptions()) -> HtmlFragment:
    slugger = _Slugger()
    warnings: list[str] = []
    parts: list[str] = []
    for i, cell in enumerate(nb.cells):
        fragment = _render_cell(cell, opts, slugger)
        parts.append(fragment.html)
        warnings.extend(f"cell {i}: {w}" for w in fragment.warnings)
    body = "\n".join(parts)
    return HtmlFragment(f'<div class="nb-notebook">\n{body}\n</div>', tuple(warnings))


PAGE_CSS = """\
body { max-width: 56rem; margin: 2rem auto; padding: 0 1rem;
       font: 16px/1.6 system-ui, sans-serif; color: #1a1a1a; }
.nb-cell { margin: 0.75rem 0; }
.nb-input, .nb-output, .nb-raw { background: #f6f6f6; border-radius: 4px;
       padding: 0.6rem 0.8rem; overflow-x: auto; font-size: 0.9em; }
.nb-input { border-left: 3px solid #88aadd; }
.nb-output-error { border-left: 3px solid #cc4444; }
.nb-output-stream-stderr { background: #fbf0f0; }
.nb-output-image img { max-width: 100%; }
table { border-collapse: collapse; } td, th { border: 1px solid #ccc; padding: 0.2rem 0.6rem; }
.ansi-bold { font-weight: bold; }
.ansi-black { color: #3f3f3f; } .ansi-red { color: #b22222; }
.ansi-green { color: #207020; } .ansi-yellow { color: #9a7d27; }
.ansi-blue { color: #2244aa; } .ansi-magenta { color: #a03ba0; }
.ansi-cyan { color: #1f8a8a; } .ansi-white { color: #888888; }
.ansi-bright-black { color: #666666; } .ansi-bright-red { color: #e05050; }
.ansi-bright-green { color: #3faf3f; } .ansi-bright-yellow { color: #c0a040; }
.ansi-bright-blue { color: #5577dd; } .ansi-bright-magenta { color: #c060c0; }
.ansi-bright-cyan { color: #40b0b0; } .ansi-bright-white { color: #aaaaaa; }
"""


def render_page(fragment: HtmlFragment | str, title: str) -> str:
    """Wrap a fragment as a complete standalone HTML page (no external assets)."""
    body = fragment.html if isinstance(fragment, HtmlFragment) else fragment
    return (
        "<!DOCTYPE html>\n"
        '<html lang="en">\n<head>\n<meta charset="utf-8"/>\n'
        f"<title>{html.escape(title, quote=False)}</title>\n"
        f"<style>\n{PAGE_CSS}</style>\n</head>\n<body>\n"
        f"{body}\n</body>\n</html>\n"
    )
