"""Convert terminal text with ANSI SGR color codes to class-tagged HTML.

Supported SGR codes: 0 (reset), 1 (bold -> ``ansi-bold``), 30-37
(foreground colors -> ``ansi-<name>``) and 90-97 (bright foreground
colors -> ``ansi-bright-<name>``). Every other escape sequence (cursor
movement, erase, OSC hyperlinks, unknown SGR parameters) is stripped.
Text is HTML-escaped; styling is emitted as ``<span class="...">`` runs.
"""

from __future__ import annotations

import html
import re

_SGR_RE = re.compile(r"\x1b\[([0-9;]*)m")
_OTHER_ESCAPES = re.compile(
    r"\x1b(?:"
    r"\][^\x07\x1b]*(?:\x07|\x1b\\)?"  # OSC ... BEL/ST (or unterminated)
    r"|\[[0-9;?]*[ -/]*[@-~]"          # CSI sequences other than SGR
    r"|[@-Z\\^_]"                       # two-byte Fe escapes
    r")"
)
_COLOR_NAMES = ("black", "red", "green", "yellow", "blue", "magenta", "cyan", "white")


def ansi_to_html(text: str) -> str:
    out: list[str] = []
    bold = False
    color: str | None = None
    span_open: tuple[str, ...] = ()

    def emit(raw: str) -> None:
        nonlocal span_open
        raw = _OTHER_ESCAPES.sub("", raw).replace("\x1b", "")
        if not raw:
            return
        classes = []
        if bold:
            classes.append("ansi-bold")
        if color:
            classes.append(f"ansi-{color}")
        want = tuple(classes)
        if span_open != want:
            if span_open:
                out.append("</span>")
            if want:
                out.append(f'<span class="{" ".join(want)}">')
            span_open = want
        out.append(html.escape(raw, quote=False))

    pos = 0
    for match in _SGR_RE.finditer(text):
        emit(text[pos:match.start()])
        codes = [int(c) for c in match.group(1).split(";") if c] or [0]
        for code in codes:
            if code == 0:
                bold, color = False, None
            elif code == 1:
                bold = True
            elif 30 <= code <= 37:
                color = _COLOR_NAMES[code - 30]
            elif 90 <= code <= 97:
                color = "bright-" + _COLOR_NAMES[code - 90]
        pos = match.end()
    emit(text[pos:])
    if span_open:
        out.append("</span>")
    return "".join(out)
