from __future__ import annotations

import pytest

from nbcampus.sanitize import sanitize_html, sanitize_svg

from conftest import assert_no_executable_vectors


def test_script_tags_removed_with_content():
    out = sanitize_html("before<script>alert('x')</script>after")
    assert out == "beforeafter"


def test_nested_and_cdata_script_content_gone():
    out = sanitize_html("<div><script>var a = '</div>';</script>kept</div>")
    assert "alert" not in out and "var a" not in out
    assert "kept" in out
    assert_no_executable_vectors(out)


def test_event_handler_attributes_stripped():
    out = sanitize_html('<img src="x.png" onerror="alert(3)" alt="ok">')
    assert 'alt="ok"' in out and "onerror" not in out


@pytest.mark.parametrize("url", [
    "javascript:alert(1)",
    "JaVaScRiPt:alert(2)",
    " jAva\tscript:alert(5)",
    "vbscript:msgbox",
    "data:text/html;base64,AAAA",
    "data:image/svg+xml;base64,AAAA",
])
def test_dangerous_urls_dropped(url):
    out = sanitize_html(f'<a href="{url}">x</a>')
    assert "href" not in out
    assert_no_executable_vectors(out)


@pytest.mark.parametrize("url", [
    "https://example.org/docs",
    "http://example.org/a?b=c",
    "mailto:someone@example.org",
    "relative/path.html",
    "#fragment",
    "data:image/png;base64,iVBORw0KGgo=",
])
def test_safe_urls_kept(url):
    out = sanitize_html(f'<a href="{url}">x</a>')
    assert f'href="{url}"' in out


def test_unknown_tags_stripped_but_text_kept():
    out = sanitize_html("<article><p>hello <blink>world</blink></p></article>")
    assert out == "<p>hello world</p>"


def test_style_blocks_and_attrs_removed():
    out = sanitize_html('<style>body{}</style><p style="color:red" class="x">t</p>')
    assert out == '<p class="x">t</p>'


def test_escaped_text_stays_escaped():
    out = sanitize_html("&lt;script&gt;not a tag&lt;/script&gt;")
    assert "<script" not in out
    assert "&lt;script&gt;" in out


def test_unbalanced_markup_is_balanced():
    out = sanitize_html("<div><p>one<div>two")
    assert out.count("<div>") == out.count("</div>")
    assert out.count("<p>") == out.count("</p>")


def test_table_markup_preserved():
    src = '<table><tr><td colspan="2">a</td></tr></table>'
    out = sanitize_html(src)
    assert "<table>" in out and 'colspan="2"' in out


def test_comments_and_doctype_dropped():
    out = sanitize_html("<!DOCTYPE html><!-- sneaky --><p>x</p>")
    assert out == "<p>x</p>"


def test_svg_keeps_drawing_drops_scripts():
    src = ('<svg xmlns="http://www.w3.org/2000/svg" width="10" height="10" onload="alert(7)">'
           '<circle cx="5" cy="5" r="4" fill="red"/><script>alert(8)</script></svg>')
    out = sanitize_svg(src)
    assert "<svg" in out and "<circle" in out and 'fill="red"' in out
    assert "onload" not in out
    assert_no_executable_vectors(out)


def test_svg_foreignobject_dropped_entirely():
    src = '<svg><foreignObject><body onload="x()">boo</body></foreignObject><rect width="2"/></svg>'
    out = sanitize_svg(src)
    assert "boo" not in out and "onload" not in out
    assert "<rect" in out


def test_svg_camelcase_attrs_restored():
    src = '<svg viewBox="0 0 4 4"><linearGradient gradientUnits="userSpaceOnUse"/></svg>'
    out = sanitize_svg(src)
    assert 'viewBox="0 0 4 4"' in out
    assert "<linearGradient" in out and "gradientUnits" in out


def test_svg_use_href_fragment_only():
    assert 'href="#star"' in sanitize_svg('<svg><use href="#star"/></svg>')
    out = sanitize_svg('<svg><use href="https://evil.example/x.svg#p"/></svg>')
    assert "href" not in out


def test_svg_url_references_fragment_only():
    kept = sanitize_svg('<svg><rect fill="url(#grad)" width="2"/></svg>')
    assert 'fill="url(#grad)"' in kept
    dropped = sanitize_svg('<svg><rect fill="url(javascript:alert(1))" width="2"/></svg>')
    assert "fill" not in dropped
