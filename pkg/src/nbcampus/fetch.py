"""HTTP notebook fetching with a content-addressed local cache.

Cache layout under the cache directory (relocatable via $NBCAMPUS_CACHE):
``objects/<sha256>`` holds response bodies; ``index.json`` maps normalized
URL -> {digest, etag, fetched_at}. Entries younger than max_age are served
without touching the network; stale entries are revalidated with
If-None-Match when an ETag is known. Writes for the same URL serialize on a
per-URL lock and land via atomic rename, so concurrent fetches never tear
the cache.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from urllib.parse import urlsplit

import requests

from .errors import (
    IntegrityError,
    InvalidUrl,
    NetworkError,
    NotFound,
    OfflineMiss,
)

DEFAULT_MAX_AGE_S = 300.0
MAX_RESPONSE_BYTES = 20 * 1024 * 1024
MAX_REDIRECTS = 5
CACHE_DIR_ENV = "NBCAMPUS_CACHE"
_HEX = set("0123456789abcdef")


def normalize_url(url: str) -> str:
    """Validate and canonicalize a fetch URL.

    GitHub web-view (blob) URLs are rewritten to their raw content host;
    anything else passes through unchanged. Non-absolute or non-http(s)
    URLs raise InvalidUrl.
    """
    parts = urlsplit(url)
    if parts.scheme not in ("http", "https") or not parts.netloc:
        raise InvalidUrl(f"not an absolute http(s) URL: {url!r}")
    host = parts.netloc.lower()
    if host in ("github.com", "www.github.com"):
        segments = parts.path.split("/")
        # /org/repo/blob/ref/path... -> raw.githubusercontent.com/org/repo/ref/path...
        if len(segments) >= 6 and segments[3] == "blob":
            rest = "/".join(segments[1:3] + segments[4:])
            return f"https://raw.githubusercontent.com/{rest}"
    return url


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_DIR_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "nbcampus"


def sha256_hex(content: bytes) -> str:
    return hashlib.sha256(content).hexdigest()


@dataclass(frozen=True)
class FetchRequest:
    url: str
    pin: str | None = None
    max_age: float | None = None
    offline: bool = False

    def __post_init__(self) -> None:
        if self.pin is not None and (len(self.pin) != 64 or set(self.pin) - _HEX):
            raise ValueError("pin must be a 64-char lowercase sha256 hex digest")


@dataclass(frozen=True)
class FetchResult:
    content: bytes
    url: str
    source: str  # "network" or "cache"
    digest: str
    etag: str | None
    fetched_at: float


class _Cache:
    """Content-addressed store plus URL index, safe for threaded use."""

    def __init__(self, root: Path):
        self.root = root
        self.objects = root / "objects"
        self.index_path = root / "index.json"
        self._index_lock = threading.Lock()
        self._url_locks: dict[str, threading.Lock] = {}
        self._url_locks_guard = threading.Lock()

    def url_lock(self, url: str) -> threading.Lock:
        with self._url_locks_guard:
            return self._url_locks.setdefault(url, threading.Lock())

    def _read_index(self) -> dict:
        try:
            with open(self.index_path, encoding="utf-8") as fh:
                return json.load(fh)
        except (OSError, json.JSONDecodeError):
            return {}

    def lookup(self, url: str) -> dict | None:
        with self._index_lock:
            entry = self._read_index().get(url)
        if entry is None:
            return None
        if not (self.objects / entry["digest"]).exists():
            return None
        return entry

    def read_object(self, digest: str) -> bytes:
        return (self.objects / digest).read_bytes()

    def _atomic_write(self, path: Path, content: bytes) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(content)
            os.replace(tmp, path)
        except BaseException:
            try:
                os.unlink(tmp)
            except OSError:
                pass
            raise

    def store(self, url: str, content: bytes, etag: str | None, fetched_at: float) -> str:
        digest = sha256_hex(content)
        obj_path = self.objects / digest
        if not obj_path.exists():
            self._atomic_write(obj_path, content)
        self.record(url, digest, etag, fetched_at)
        return digest

    def record(self, url: str, digest: str, etag: str | None, fetched_at: float) -> None:
        with self._index_lock:
            index = self._read_index()
            index[url] = {"digest": digest, "etag": etag, "fetched_at": fetched_at}
            self._atomic_write(
                self.index_path, json.dumps(index, indent=1, sort_keys=True).encode("utf-8")
            )


class Fetcher:
    def __init__(
        self,
        cache_dir: Path | str | None = None,
        *,
        max_age: float = DEFAULT_MAX_AGE_S,
        max_bytes: int = MAX_RESPONSE_BYTES,
        timeout_s: float = 30.0,
        session: requests.Session | None = None,
    ):
        self.cache = _Cache(Path(cache_dir) if cache_dir else default_cache_dir())
        self.max_age = max_age
        self.max_bytes = max_bytes
        self.timeout_s = timeout_s
        if session is None:
            session = requests.Session()
            session.trust_env = False
        session.max_redirects = MAX_REDIRECTS
        self.session = session

    def fetch(self, req: FetchRequest) -> FetchResult:
        url = normalize_url(req.url)
        max_age = self.max_age if req.max_age is None else req.max_age
        with self.cache.url_lock(url):
            result = self._fetch_locked(url, req, max_age)
        if req.pin is not None and result.digest != req.pin:
            raise IntegrityError(
                f"{url}: content digest {result.digest} does not match pin {req.pin}"
            )
        return result

    def _fetch_locked(self, url: str, req: FetchRequest, max_age: float) -> FetchResult:
        entry = self.cache.lookup(url)
        if req.offline:
            if entry is None:
                raise OfflineMiss(f"{url} is not cached and offline mode is on")
            return self._from_cache(url, entry)
        if entry is not None and time.time() - entry["fetched_at"] < max_age:
            return self._from_cache(url, entry)

        headers = {"User-Agent": "nbcampus/0.1"}
        if entry is not None and entry.get("etag"):
            headers["If-None-Match"] = entry["etag"]
        try:
            resp = self.session.get(url, headers=headers, stream=True, timeout=self.timeout_s)
        except requests.RequestException as exc:
            raise NetworkError(f"{url}: {exc}") from exc
        with resp:
            if resp.status_code == 304 and entry is not None:
                now = time.time()
                etag = resp.headers.get("ETag") or entry.get("etag")
                self.cache.record(url, entry["digest"], etag, now)
                return FetchResult(
                    self.cache.read_object(entry["digest"]),
                    url, "cache", entry["digest"], etag, now,
                )
            if resp.status_code == 404:
                raise NotFound(f"{url}: HTTP 404")
            if resp.status_code != 200:
                raise NetworkError(f"{url}: HTTP {resp.status_code}")
            content = b""
            try:
                for chunk in resp.iter_content(chunk_size=65536):
                    content += chunk
                    if len(content) > self.max_bytes:
                        raise NetworkError(f"{url}: response exceeds {self.max_bytes} bytes")
            except requests.RequestException as exc:
                raise NetworkError(f"{url}: {exc}") from exc
        now = time.time()
        digest = self.cache.store(url, content, resp.headers.get("ETag"), now)
        return FetchResult(content, url, "network", digest, resp.headers.get("ETag"), now)

    def _from_cache(self, url: str, entry: dict) -> FetchResult:
        return FetchResult(
            self.cache.read_object(entry["digest"]),
            url, "cache", entry["digest"], entry.get("etag"), entry["fetched_at"],
        )


def fetch_url(
    url: str,
    *,
    pin: str | None = None,
    max_age: float | None = None,
    offline: bool = False,
    cache_dir: Path | str | None = None,
) -> FetchResult:
    return Fetcher(cache_dir).fetch(FetchRequest(url, pin=pin, max_age=max_age, offline=offline))
