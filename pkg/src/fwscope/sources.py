"""Paginated scan-source client with an offline fixture mode.

Live mode talks to a JSON endpoint returning
``{"records": [...], "next_cursor": "..." | null}`` for
``GET <url>?q=<query>&per_page=<n>[&cursor=<c>]``.
"""

from __future__ import annotations

import json
import logging
import os
import time
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Optional

from fwscope.errors import SourceError, ValidationError
from fwscope.ingest import ScanRecord, record_from_mapping

log = logging.getLogger(__name__)

ENV_URL = "FWSCOPE_SOURCE_URL"
ENV_TOKEN = "FWSCOPE_SOURCE_TOKEN"
RETRYABLE_STATUS = frozenset({408, 429, 500, 502, 503, 504})


@dataclass(frozen=True)
class SourceSettings:
    kind: str = "fixture"
    url: Optional[str] = None
    token: Optional[str] = None
    fixture_path: Optional[Path] = None
    max_requests_per_second: float = 1.0
    max_retries: int = 5
    backoff_base: float = 0.5
    timeout: float = 30.0
    page_size: int = 100
    default_source: str = "censys_banner"

    def __post_init__(self) -> None:
        if self.kind not in ("fixture", "http"):
            raise ValidationError(f"unknown source kind {self.kind!r}")
        if self.kind == "fixture" and self.fixture_path is None:
            raise ValidationError("fixture source needs a fixture path")
        if self.kind == "http" and not self.url:
            raise ValidationError(f"http source needs a URL (set {ENV_URL})")
        if self.max_requests_per_second <= 0:
            raise ValidationError("request rate must be positive")
        if self.max_retries < 0:
            raise ValidationError("max_retries must be >= 0")

    @classmethod
    def from_env(cls, **overrides) -> "SourceSettings":
        url = os.environ.get(ENV_URL)
        token = os.environ.get(ENV_TOKEN)
        return cls(kind="http", url=url, token=token, **overrides)


@dataclass(frozen=True)
class SourcePage:
    records: list[ScanRecord]
    next_cursor: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.records and self.next_cursor is not None:
            raise ValidationError("an empty page cannot carry a cursor")


@dataclass
class FetchStats:
    requests: int = 0
    retries: int = 0
    pages: int = 0
    records: int = 0
    skipped_records: int = 0
    warnings: list[str] = field(default_factory=list)


class RateLimiter:
    """Spaces calls at least ``1 / rate`` seconds apart."""

    def __init__(self, rate: float, clock: Callable[[], float] = time.monotonic, sleep=time.sleep):
        self.interval = 1.0 / rate
        self.clock = clock
        self.sleep = sleep
        self._last: Optional[float] = None

    def wait(self) -> None:
        now = self.clock()
        if self._last is not None:
            delay = self._last + self.interval - now
            if delay > 0:
                self.sleep(delay)
                now += delay
        self._last = now


def _warn(stats: FetchStats, msg: str) -> None:
    log.warning(msg)
    stats.warnings.append(msg)


def _page_from_payload(payload, settings: SourceSettings, stats: FetchStats):
    """``(records, next_cursor)`` or ``None`` for a malformed page.

    The cursor comes from the payload, so a page whose records were all
    invalid still leads on; an empty record list ends pagination.
    """
    if not isinstance(payload, dict) or not isinstance(payload.get("records"), list):
        return None
    records = []
    for i, item in enumerate(payload["records"]):
        try:
            records.append(record_from_mapping(item, default_source=settings.default_source))
        except ValidationError as exc:
            stats.skipped_records += 1
            _warn(stats, f"page {stats.pages + 1}: skipped record {i}: {exc}")
    cursor = payload.get("next_cursor")
    if cursor in (None, "") or not payload["records"]:
        cursor = None
    return records, (None if cursor is None else str(cursor))


def _fixture_pages(settings: SourceSettings, stats: FetchStats) -> Iterator[SourcePage]:
    with open(settings.fixture_path, encoding="utf-8") as handle:
        doc = json.load(handle)
    pages = {p.get("cursor"): p for p in doc.get("pages", []) if isinstance(p, dict)}
    cursor: Optional[str] = None
    seen: set = set()
    while cursor not in seen:
        seen.add(cursor)
        raw = pages.get(cursor)
        if raw is None:
            _warn(stats, f"fixture has no page for cursor {cursor!r}")
            return
        stats.requests += 1
        parsed = _page_from_payload(raw, settings, stats)
        if parsed is None:
            _warn(stats, f"malformed fixture page {cursor!r} skipped")
            cursor = raw.get("next_cursor")
        else:
            records, cursor = parsed
            if records:
                yield SourcePage(records, cursor)
        if cursor is None:
            return


def _http_get(url: str, settings: SourceSettings, opener) -> bytes:
    request = urllib.request.Request(url, headers={"Accept": "application/json"})
    if settings.token:
        request.add_header("Authorization", f"Bearer {settings.token}")
    with opener(request, timeout=settings.timeout) as response:
        return response.read()


def _http_pages(
    settings: SourceSettings, query: str, stats: FetchStats, opener, sleep
) -> Iterator[SourcePage]:
    limiter = RateLimiter(settings.max_requests_per_second, sleep=sleep)
    cursor: Optional[str] = None
    while True:
        params = {"q": query, "per_page": settings.page_size}
        if cursor is not None:
            params["cursor"] = cursor
        url = f"{settings.url}?{urllib.parse.urlencode(params)}"
        attempt = 0
        while True:
            limiter.wait()
            stats.requests += 1
            try:
                body = _http_get(url, settings, opener)
                break
            except urllib.error.HTTPError as exc:
                if exc.code not in RETRYABLE_STATUS:
                    raise SourceError(f"{url}: HTTP {exc.code}") from exc
                err: Exception = exc
            except (urllib.error.URLError, TimeoutError, ConnectionError) as exc:
                err = exc
            if attempt >= settings.max_retries:
                raise SourceError(f"{url}: giving up after {attempt} retries: {err}") from err
            attempt += 1
            stats.retries += 1
            delay = settings.backoff_base * 2 ** (attempt - 1)
            log.warning("retry %d/%d in %.2fs after: %s", attempt, settings.max_retries, delay, err)
            sleep(delay)
        try:
            payload = json.loads(body)
        except (json.JSONDecodeError, UnicodeDecodeError):
            _warn(stats, f"page {stats.pages + 1} is not JSON; stopping")
            return
        parsed = _page_from_payload(payload, settings, stats)
        if parsed is None:
            _warn(stats, f"page {stats.pages + 1} has no record list; skipped")
            nxt = payload.get("next_cursor") if isinstance(payload, dict) else None
            cursor = None if nxt in (None, "") else str(nxt)
        else:
            records, cursor = parsed
            if records:
                yield SourcePage(records, cursor)
        if cursor is None:
            return


def fetch_pages(
    settings: SourceSettings,
    query: str = "",
    stats: Optional[FetchStats] = None,
    opener=urllib.request.urlopen,
    sleep: Callable[[float], None] = time.sleep,
) -> Iterator[SourcePage]:
    """Yield pages until the source stops returning a cursor."""
    stats = stats if stats is not None else FetchStats()
    if settings.kind == "fixture":
        pages = _fixture_pages(settings, stats)
    else:
        pages = _http_pages(settings, query, stats, opener, sleep)
    for page in pages:
        stats.pages += 1
        stats.records += len(page.records)
        yield page
