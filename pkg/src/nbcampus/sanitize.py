"""Allow-list HTML and SVG sanitization.

Everything not explicitly allowed is removed: unknown tags are stripped
(HTML mode keeps their text, SVG mode drops it), event-handler and style
attributes never survive, and URL-bearing attributes must carry http(s),
mailto, relative, fragment, or raster data: URLs. Script/style/iframe and
friends are dropped together with their content. Output is balanced,
entity-escaped markup regardless of how mangled the input was.
"""

from __future__ import annotations

import html
import re
from html.parser import HTMLParser

_HTML_TAGS: dict[str, set[str]] = {
    "a": {"href", "title"},
    "abbr": {"title"},
    "b": set(), "blockquote": set(), "br": set(),
    "caption": set(), "code": set(),
    "col": {"span"}, "colgroup": {"span"},
    "dd": set(), "del": set(), "details": {"open"}, "div": set(),
    "dl": set(), "dt": set(), "em": set(),
    "figcaption": set(), "figure": set(),
    "h1": {"id"}, "h2": {"id"}, "h3": {"id"}, "h4": {"id"}, "h5": {"id"}, "h6": {"id"},
    "hr": set(), "i": set(),
    "img": {"src", "alt", "title", "width", "height"},
    "ins": set(), "kbd": set(), "li": set(), "mark": set(),
    "ol": {"start"}, "p": set(), "pre": set(), "q": set(),
    "s": set(), "samp": set(), "small": set(), "span": set(),
    "strong": set(), "sub": set(), "summary": set(), "sup": set(),
    "table": set(), "tbody": set(),
    "td": {"colspan", "rowspan"}, "tfoot": set(),
    "th": {"colspan", "rowspan", "scope"}, "thead": set(), "tr": set(),
    "u": set(), "ul": set(),
}
_HTML_GLOBAL_ATTRS = {"class"}
_VOID_TAGS = {"br", "hr", "img", "col"}
# Removed together with everything inside them.
_DROP_CONTENT_TAGS = {
    "script", "style", "iframe", "object", "embed", "applet", "noscript",
    "template", "title", "textarea", "xmp", "noembed", "noframes",
    "frame", "frameset", "select", "option", "base", "link", "meta", "head",
}

_SVG_TAGS: dict[str, set[str]] = {
    "svg": {"width", "height", "viewbox", "preserveaspectratio", "xmlns",
            "xmlns:xlink", "version", "baseprofile", "role", "aria-hidden"},
    "g": set(), "defs": set(), "title": set(), "desc": set(), "symbol": set(),
    "path": {"d", "pathlength"},
    "circle": {"cx", "cy", "r"},
    "ellipse": {"cx", "cy", "rx", "ry"},
    "rect": {"x", "y", "width", "height", "rx", "ry"},
    "line": {"x1", "y1", "x2", "y2"},
    "polyline": {"points"}, "polygon": {"points"},
    "text": {"x", "y", "dx", "dy", "text-anchor", "textlength"},
    "tspan": {"x", "y", "dx", "dy"},
    "stop": {"offset", "stop-color", "stop-opacity"},
    "lineargradient": {"x1", "y1", "x2", "y2", "gradientunits", "gradienttransform", "spreadmethod"},
    "radialgradient": {"cx", "cy", "r", "fx", "fy", "gradientunits", "gradienttransform", "spreadmethod"},
    "clippath": {"clippathunits"},
    "mask": {"x", "y", "width", "height"},
    "pattern": {"x", "y", "width", "height", "patternunits", "patterntransform"},
    "marker": {"markerwidth", "markerheight", "refx", "refy", "orient"},
    "use": {"href", "xlink:href", "x", "y", "width", "height"},
}
_SVG_PRESENTATION_ATTRS = {
    "id", "class", "transform", "opacity",
    "fill", "fill-opacity", "fill-rule",
    "stroke", "stroke-width", "stroke-linecap", "stroke-linejoin",
    "stroke-dasharray", "stroke-dashoffset", "stroke-opacity", "stroke-miterlimit",
    "font-size", "font-family", "font-weight", "font-style",
    "dominant-baseline", "clip-path", "clip-rule", "mask",
    "marker-start", "marker-mid", "marker-end", "vector-effect",
}
_SVG_VOID = set()
_SVG_DROP = {"script", "foreignobject", "animate", "animatemotion",
             "animatetransform", "set", "style", "image", "filter", "fegaussianblur"}
# HTMLParser lowercases names; restore SVG's camelCase on output.
_SVG_TAG_CASE = {
    "lineargradient": "linearGradient", "radialgradient": "radialGradient",
    "clippath": "clipPath",
}
_SVG_ATTR_CASE = {
    "viewbox": "viewBox", "preserveaspectratio": "preserveAspectRatio",
    "baseprofile": "baseProfile", "pathlength": "pathLength",
    "textlength": "textLength", "gradientunits": "gradientUnits",
    "gradienttransform": "gradientTransform", "spreadmethod": "spreadMethod",
    "clippathunits": "clipPathUnits", "patternunits": "patternUnits",
    "patterntransform": "patternTransform", "markerwidth": "markerWidth",
    "markerheight": "markerHeight", "refx": "refX", "refy": "refY",
}

_SCHEME_RE = re.compile(r"^([a-z][a-z0-9+.\-]*):")
_DATA_IMAGE_RE = re.compile(r"^data:image/(png|jpeg|gif);base64,")
_URL_FRAGMENT_REF = re.compile(r"url\(\s*['\"]?\s*#")
_URL_ANY = re.compile(r"url\(", re.IGNORECASE)


def _is_safe_url(value: str) -> bool:
    # Browsers ignore control chars and whitespace inside schemes, so the
    # check runs on a stripped lowercase copy while the original is emitted.
    cleaned = re.sub(r"[\x00-\x20\x7f]", "", value).lower()
    match = _SCHEME_RE.match(cleaned)
    if match is None:
        return True  # relative path or #fragment
    scheme = match.group(1)
    if scheme in ("http", "https", "mailto"):
        return True
    if scheme == "data":
        return bool(_DATA_IMAGE_RE.match(cleaned))
    return False


def _svg_value_safe(value: str) -> bool:
    cleaned = re.sub(r"[\x00-\x20\x7f]", "", value).lower()
    if "javascript:" in cleaned or "&#" in value:
        return False
    # url(...) may only reference in-document fragments (gradients, clips).
    for m in _URL_ANY.finditer(cleaned):
        if not _URL_FRAGMENT_REF.match(cleaned, m.start()):
            return False
    return True


class _Sanitizer(HTMLParser):
    def __init__(self, tags, global_attrs, void, drop, *, svg_mode=False):
        super().__init__(convert_charrefs=True)
        self.tags = tags
        self.global_attrs = global_attrs
        self.void = void
        self.drop = drop
        self.svg_mode = svg_mode
        self.out: list[str] = []
        self.open_tags: list[str] = []
        self.skip_depth = 0

    # -- helpers ------------------------------------------------------------

    def _clean_attrs(self, tag: str, attrs) -> list[tuple[str, str]]:
        kept = []
        for name, value in attrs:
            name = name.lower()
            value = value if value is not None else ""
            if name.startswith("on"):
                continue
            allowed = self.tags.get(tag, set())
            if name not in allowed and name not in self.global_attrs:
                continue
            if self.svg_mode:
                if name in ("href", "xlink:href"):
                    if not value.strip().startswith("#"):
                        continue
                elif not _svg_value_safe(value):
                    continue
            elif name in ("href", "src") and not _is_safe_url(value):
                continue
            kept.append((name, value))
        return kept

    def _emit_start(self, tag: str, attrs, self_closing: bool) -> None:
        out_tag = _SVG_TAG_CASE.get(tag, tag) if self.svg_mode else tag
        parts = [f"<{out_tag}"]
        for name, value in self._clean_attrs(tag, attrs):
            out_name = _SVG_ATTR_CASE.get(name, name) if self.svg_mode else name
            parts.append(f' {out_name}="{html.escape(value, quote=True)}"')
        parts.append("/>" if self_closing else ">")
        self.out.append("".join(parts))
        if not self_closing:
            self.open_tags.append(tag)

    # -- parser callbacks -----------------------------------------------------

    def handle_starttag(self, tag, attrs):
        if self.skip_depth:
            if tag in self.drop or (self.svg_mode and tag not in self.tags):
                self.skip_depth += 1
            return
        if tag in self.drop:
            self.skip_depth = 1
            return
        if tag not in self.tags:
            if self.svg_mode:
                self.skip_depth = 1  # unknown svg subtree goes away entirely
            return  # HTML mode: strip the tag, keep children
        if tag in self.void:
            self._emit_start(tag, attrs, self_closing=True)
        else:
            self._emit_start(tag, attrs, self_closing=False)

    def handle_startendtag(self, tag, attrs):
        if self.skip_depth:
            return
        if tag in self.drop or tag not in self.tags:
            return
        self._emit_start(tag, attrs, self_closing=True)

    def handle_endtag(self, tag):
        if self.skip_depth:
            if tag in self.drop or (self.svg_mode and tag not in self.tags):
                self.skip_depth -= 1
            return
        if tag not in self.tags or tag in self.void:
            return
        if tag not in self.open_tags:
            return
        # Close intervening tags so output nesting stays balanced.
        while self.open_tags:
            open_tag = self.open_tags.pop()
            out_tag = _SVG_TAG_CASE.get(open_tag, open_tag) if self.svg_mode else open_tag
            self.out.append(f"</{out_tag}>")
            if open_tag == tag:
                break

    def handle_data(self, data):
        if self.skip_depth:
            return
        self.out.append(html.escape(data, quote=False))

    def result(self) -> str:
        while self.open_tags:
            open_tag = self.open_tags.pop()
            out_tag = _SVG_TAG_CASE.get(open_tag, open_tag) if self.svg_mode else open_tag
            self.out.append(f"</{out_tag}>")
        return "".join(self.out)


def sanitize_html(fragment: str) -> str:
    """Reduce an untrusted HTML fragment to the allow-listed subset."""
    parser = _Sanitizer(_HTML_TAGS, _HTML_GLOBAL_ATTRS, _VOID_TAGS, _DROP_CONTENT_TAGS)
    parser.feed(fragment)
    parser.close()
    return parser.result()


def sanitize_svg(fragment: str) -> str:
    """Reduce an untrusted SVG document/fragment to safe static drawing markup."""
    parser = _Sanitizer(_SVG_TAGS, _SVG_PRESENTATION_ATTRS, _SVG_VOID, _SVG_DROP, svg_mode=True)
    parser.feed(fragment)
    parser.close()
    return parser.result()
