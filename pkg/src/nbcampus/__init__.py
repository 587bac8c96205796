"""nbcampus: a notebook-first course toolchain.

Fetches public Jupyter notebooks, slices them into learning-sequence units,
renders them to sanitized HTML, lints lessons against a teaching checklist,
releases instructor notebooks as student assignments, autogrades submissions
in supervised executor sessions, and serves the result over HTTP with a
persistent gradebook.
"""

__version__ = "0.1.0"
