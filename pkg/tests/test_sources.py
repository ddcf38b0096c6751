from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

import pytest

from fwscope.errors import SourceError, ValidationError
from fwscope.sources import FetchStats, RateLimiter, SourcePage, SourceSettings, fetch_pages

RECORD = {"body": "Firmware ver. 1.2", "scanned_at": "2020-04"}


class Script:
    """Responses served in order; the last one repeats."""

    def __init__(self, responses):
        self.responses = list(responses)
        self.requests: list[dict] = []

    def next(self):
        return self.responses.pop(0) if len(self.responses) > 1 else self.responses[0]


@pytest.fixture
def server():
    servers = []

    def start(script: Script) -> str:
        class Handler(BaseHTTPRequestHandler):
            def do_GET(self):  # noqa: N802
                script.requests.append(
                    {"query": parse_qs(urlparse(self.path).query), "auth": self.headers.get("Authorization")}
                )
                status, payload = script.next()
                body = payload if isinstance(payload, bytes) else json.dumps(payload).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def log_message(self, *args):
                pass

        httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        threading.Thread(target=httpd.serve_forever, daemon=True).start()
        servers.append(httpd)
        return f"http://127.0.0.1:{httpd.server_port}/search"

    yield start
    for httpd in servers:
        httpd.shutdown()
        httpd.server_close()


def http_settings(url, **kw):
    return SourceSettings(kind="http", url=url, max_requests_per_second=1000, backoff_base=0.001, timeout=5, **kw)


def records(pages):
    return [r for p in pages for r in p.records]


def test_fixture_two_pages(fixtures):
    stats = FetchStats()
    pages = list(fetch_pages(SourceSettings(fixture_path=fixtures / "source_pages.json"), stats=stats))
    assert [len(p.records) for p in pages] == [5, 5]
    assert stats.records == 10 and stats.pages == 2
    assert pages[-1].next_cursor is None
    assert all(r.source in ("censys_banner", "censys_public") for r in records(pages))


def test_empty_first_page(server):
    url = server(Script([(200, {"records": [], "next_cursor": None})]))
    assert list(fetch_pages(http_settings(url), "q")) == []


def test_three_failures_then_success(server, caplog):
    pages = [
        (503, {"error": "busy"}),
        (503, {"error": "busy"}),
        (429, {"error": "slow down"}),
        (200, {"records": [RECORD] * 2, "next_cursor": "c2"}),
        (200, {"records": [RECORD], "next_cursor": None}),
    ]
    script = Script(pages)
    url = server(script)
    stats = FetchStats()
    with caplog.at_level(logging.WARNING, logger="fwscope.sources"):
        got = list(fetch_pages(http_settings(url, max_retries=5, token="secret"), "router", stats))
    assert len(records(got)) == 3 and stats.retries == 3
    assert sum("retry" in m for m in caplog.messages) == 3
    assert script.requests[-1]["query"]["cursor"] == ["c2"]
    assert script.requests[0]["query"]["q"] == ["router"]
    assert script.requests[0]["auth"] == "Bearer secret"


def test_retries_exhausted(server):
    url = server(Script([(500, {})]))
    stats = FetchStats()
    with pytest.raises(SourceError, match="giving up after 2 retries"):
        list(fetch_pages(http_settings(url, max_retries=2), "", stats))
    assert stats.requests == 3


def test_non_retryable_status(server):
    url = server(Script([(401, {})]))
    stats = FetchStats()
    with pytest.raises(SourceError, match="401"):
        list(fetch_pages(http_settings(url), "", stats))
    assert stats.retries == 0


def test_backoff_is_exponential(server):
    url = server(Script([(502, {}), (502, {}), (502, {}), (200, {"records": [], "next_cursor": None})]))
    delays = []
    settings = SourceSettings(kind="http", url=url, max_requests_per_second=1e9, backoff_base=0.5)
    list(fetch_pages(settings, "", sleep=delays.append))
    assert [d for d in delays if d >= 0.5] == [0.5, 1.0, 2.0]


def test_malformed_page_skipped(server):
    script = Script(
        [
            (200, {"oops": True, "next_cursor": "c2"}),
            (200, {"records": [RECORD, {"body": "no date"}], "next_cursor": None}),
        ]
    )
    stats = FetchStats()
    got = list(fetch_pages(http_settings(server(script)), "", stats))
    assert len(records(got)) == 1 and stats.skipped_records == 1
    assert len(stats.warnings) == 2


def test_non_json_page_stops(server):
    stats = FetchStats()
    got = list(fetch_pages(http_settings(server(Script([(200, b"<html>")]))), "", stats))
    assert got == [] and stats.warnings


def test_source_page_invariant():
    with pytest.raises(ValidationError):
        SourcePage([], "next")


def test_settings_validation(monkeypatch):
    with pytest.raises(ValidationError):
        SourceSettings(kind="fixture")
    monkeypatch.delenv("FWSCOPE_SOURCE_URL", raising=False)
    with pytest.raises(ValidationError):
        SourceSettings.from_env()
    monkeypatch.setenv("FWSCOPE_SOURCE_URL", "http://example.invalid/api")
    monkeypatch.setenv("FWSCOPE_SOURCE_TOKEN", "t")
    s = SourceSettings.from_env(max_retries=1)
    assert (s.url, s.token, s.max_retries) == ("http://example.invalid/api", "t", 1)


def test_rate_limiter_spacing():
    now = [0.0]
    slept = []

    def sleep(d):
        slept.append(d)
        now[0] += d

    limiter = RateLimiter(2.0, clock=lambda: now[0], sleep=sleep)
    for _ in range(3):
        limiter.wait()
    assert slept == [0.5, 0.5]
    now[0] += 10
    limiter.wait()
    assert slept == [0.5, 0.5]
