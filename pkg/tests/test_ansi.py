from __future__ import annotations

from nbcampus.ansi import ansi_to_html


def test_plain_text_escaped_only():
    assert ansi_to_html("a < b & c") == "a &lt; b &amp; c"


def test_basic_color_span():
    assert ansi_to_html("\x1b[31mred\x1b[0m plain") == '<span class="ansi-red">red</span> plain'


def test_bold_plus_color_combined():
    out = ansi_to_html("\x1b[1m\x1b[34mINFO\x1b[0m done")
    assert out == '<span class="ansi-bold ansi-blue">INFO</span> done'


def test_compound_sgr_parameters():
    assert ansi_to_html("\x1b[1;32mok\x1b[0m") == '<span class="ansi-bold ansi-green">ok</span>'


def test_bright_colors():
    assert ansi_to_html("\x1b[90mdim\x1b[0m") == '<span class="ansi-bright-black">dim</span>'


def test_unterminated_style_closed_at_end():
    assert ansi_to_html("\x1b[31mred to end") == '<span class="ansi-red">red to end</span>'


def test_color_replaces_color():
    out = ansi_to_html("\x1b[31mr\x1b[32mg\x1b[0m")
    assert out == '<span class="ansi-red">r</span><span class="ansi-green">g</span>'


def test_unknown_sgr_codes_ignored():
    # 256-color selector: unsupported, contributes no styling.
    assert ansi_to_html("\x1b[38;5;196mx\x1b[0m") == "x"


def test_non_sgr_escapes_stripped():
    assert ansi_to_html("\x1b[2Jcleared \x1b[Kline\rdone") == "cleared line\rdone"


def test_osc_sequences_stripped():
    out = ansi_to_html("\x1b]0;title\x07text \x1b]8;;https://e.com\x07link\x1b]8;;\x07")
    assert out == "text link"


def test_reset_without_styles_is_noop():
    assert ansi_to_html("\x1b[0mplain") == "plain"


def test_empty_sgr_means_reset():
    assert ansi_to_html("\x1b[31mred\x1b[mplain") == '<span class="ansi-red">red</span>plain'


def test_no_escape_characters_survive():
    out = ansi_to_html("\x1b[31ma\x1b[99Xb\x1bQc\x1b")
    assert "\x1b" not in out
