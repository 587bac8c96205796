"""Exception types shared across the toolchain.

Every operational failure raised by this package derives from
:class:`NbCampusError`, so callers (and the CLI, which maps them to exit
code 1) can catch one base type.
"""

from __future__ import annotations


class NbCampusError(Exception):
    """Base class for all errors raised by nbcampus."""


# --- notebook documents ---------------------------------------------------

class MalformedJson(NbCampusError):
    """Input is not valid UTF-8 JSON."""


class UnsupportedFormat(NbCampusError):
    """Notebook format major version is not 4."""


class SchemaViolation(NbCampusError):
    """JSON parsed but required notebook fields are missing or mistyped."""


class StartMarkNotFound(NbCampusError):
    """A slice start mark was given but no cell contains it."""


# --- fetching -------------------------------------------------------------

class InvalidUrl(NbCampusError):
    """URL is not an absolute http(s) URL."""


class NetworkError(NbCampusError):
    """Transport-level failure or non-404 HTTP error."""


class NotFound(NbCampusError):
    """Server answered 404 for the requested URL."""


class IntegrityError(NbCampusError):
    """Fetched content does not match the pinned SHA-256 digest."""


class OfflineMiss(NbCampusError):
    """Offline mode requested but the URL is not in the cache."""


# --- course manifests and builds -------------------------------------------

class MalformedManifest(NbCampusError):
    """Manifest is not parseable or violates the schema."""


class DuplicateId(NbCampusError):
    """A module or unit id appears more than once in a manifest."""


class MissingField(NbCampusError):
    """A required manifest field is absent."""


class BuildError(NbCampusError):
    """A unit failed to build; message is tagged with the unit id."""

    def __init__(self, unit_id: str, cause: Exception):
        self.unit_id = unit_id
        self.cause = cause
        super().__init__(f"unit {unit_id!r}: {cause}")


# --- grading ----------------------------------------------------------------

class NoGradedCells(NbCampusError):
    """Instructor notebook contains no autograded test cells."""


class DuplicateGradeId(NbCampusError):
    """Two graded or locked cells share a grade_id."""


class MissingPoints(NbCampusError):
    """A test cell lacks a usable points value (or the total is not > 0)."""


class UnbalancedSolutionDelimiters(NbCampusError):
    """BEGIN/END SOLUTION markers in a cell do not pair up."""


class ExecutorFailure(NbCampusError):
    """The executor session failed while grading a submission."""


# --- executor sessions ------------------------------------------------------

class UnknownEnvironment(NbCampusError):
    """No registered executor environment with that name."""


class SpawnFailure(NbCampusError):
    """Worker process could not be started."""


class HandshakeTimeout(NbCampusError):
    """Worker did not present a valid handshake line in time."""


class ExecutorProtocolError(NbCampusError):
    """Worker wrote something that is not a valid protocol response."""


class SessionClosed(NbCampusError):
    """Operation attempted on a closed executor session."""


# --- app service ------------------------------------------------------------

class UnknownAssignment(NbCampusError):
    """Submission addressed to an assignment id that is not registered."""


class MalformedSubmission(NbCampusError):
    """Uploaded submission is not a parseable notebook."""


class QueueFull(NbCampusError):
    """Grading queue is at capacity; submission rejected."""


class InvalidConfig(NbCampusError):
    """Service configuration file is unusable."""


class BindFailure(NbCampusError):
    """Service could not bind its host/port."""
