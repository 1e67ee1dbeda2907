"""Page fetchers: live HTTP plus offline fixtures.

Everything the crawler pulls goes through the :class:`PageFetcher`
protocol so the network can be swapped out for an in-memory map or a
directory of files.
"""

from __future__ import annotations

import threading
from pathlib import Path
from typing import Protocol, runtime_checkable
from urllib.parse import urlsplit

import httpx

from .crawler import DEFAULT_USER_AGENT, Page
from .errors import FetchError


@runtime_checkable
class PageFetcher(Protocol):
    def fetch(self, url: str) -> Page:
        """Fetch one URL, raising :class:`FetchError` on transport failure."""
        ...


class HttpFetcher:
    """Fetches over live HTTP with a shared client and fixed timeout."""

    def __init__(self, user_agent: str = DEFAULT_USER_AGENT, timeout_ms: int = 10_000,
                 client: httpx.Client | None = None):
        self._client = client or httpx.Client(
            headers={"User-Agent": user_agent},
            timeout=timeout_ms / 1000.0,
            follow_redirects=True,
        )

    def fetch(self, url: str) -> Page:
        try:
            resp = self._client.get(url)
        except httpx.HTTPError as exc:
            raise FetchError(f"{url}: {exc}") from exc
        ok = 200 <= resp.status_code < 300
        return Page(
            url=url,
            status=resp.status_code,
            content_type=resp.headers.get("content-type", ""),
            body=resp.content if ok else b"",
        )

    def close(self):
        self._client.close()


class InMemoryFetcher:
    """Serves pages from a ``url -> (status, content_type, body)`` map.

    URLs absent from the map come back as 404. ``fail`` URLs raise
    :class:`FetchError` instead, and every request is appended to
    ``calls`` so tests can assert fetch counts.
    """

    def __init__(self, pages: dict[str, tuple[int, str, bytes]], fail: set[str] | None = None):
        self._pages = dict(pages)
        self._fail = set(fail or ())
        self.calls: list[str] = []
        self._lock = threading.Lock()

    def fetch(self, url: str) -> Page:
        with self._lock:
            self.calls.append(url)
        if url in self._fail:
            raise FetchError(f"{url}: simulated transport failure")
        entry = self._pages.get(url)
        if entry is None:
            return Page(url=url, status=404, content_type="text/plain", body=b"")
        status, content_type, body = entry
        return Page(url=url, status=status, content_type=content_type,
                    body=body if 200 <= status < 300 else b"")

    @classmethod
    def from_html(cls, pages: dict[str, str], **kwargs) -> "InMemoryFetcher":
        return cls(
            {url: (200, "text/html; charset=utf-8", html.encode("utf-8")) for url, html in pages.items()},
            **kwargs,
        )


_SUFFIX_TYPES = {
    ".htm": "text/html; charset=utf-8",
    ".html": "text/html; charset=utf-8",
    ".json": "application/json",
    ".pdf": "application/pdf",
    ".txt": "text/plain; charset=utf-8",
    ".xml": "application/xml",
}


class DirectoryFetcher:
    """Serves any host's URL paths from files under a root directory.

    ``/`` maps to ``index.html``; other paths are tried verbatim, then
    with ``.html`` appended, then as ``<path>/index.html``. Misses are 404.
    """

    def __init__(self, root: str | Path):
        self._root = Path(root).resolve()
        if not self._root.is_dir():
            raise FileNotFoundError(f"fixture root is not a directory: {self._root}")

    def _resolve(self, url_path: str) -> Path | None:
        rel = url_path.lstrip("/")
        candidates = [rel or "index.html"]
        if rel and not rel.endswith("/"):
            candidates += [rel + ".html", rel + "/index.html"]
        elif rel:
            candidates.append(rel + "index.html")
        for cand in candidates:
            target = (self._root / cand).resolve()
            if target.is_file() and target.is_relative_to(self._root):
                return target
        return None

    def fetch(self, url: str) -> Page:
        target = self._resolve(urlsplit(url).path)
        if target is None:
            return Page(url=url, status=404, content_type="text/plain", body=b"")
        content_type = _SUFFIX_TYPES.get(target.suffix.lower(), "application/octet-stream")
        return Page(url=url, status=200, content_type=content_type, body=target.read_bytes())
