"""Same-origin breadth-first crawler and HTML-to-text extraction.

The crawler walks the link graph from a seed URL, fetching through an
injectable :class:`~sitegrounder.fetchers.PageFetcher` so tests and offline
runs never touch the network. Each HTML page becomes a :class:`Document`
whose visible text is grouped into blocks at block-level tag boundaries.
"""

from __future__ import annotations

import json
import re
import threading
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from datetime import datetime, timezone
from html.parser import HTMLParser
from pathlib import Path
from typing import TYPE_CHECKING
from urllib import robotparser
from urllib.parse import urljoin, urlsplit, urlunsplit

from .errors import FetchError, NotHtml, SeedUnreachable, UrlRejected

if TYPE_CHECKING:
    from .fetchers import PageFetcher

DEFAULT_USER_AGENT = "sitegrounder/0.1"

_HTML_MEDIA_TYPES = {"text/html", "application/xhtml+xml"}

# Tags whose start or end flushes the current text block.
_BLOCK_TAGS = {
    "address", "article", "aside", "blockquote", "body", "br", "caption",
    "dd", "div", "dl", "dt", "fieldset", "figcaption", "figure", "footer",
    "form", "h1", "h2", "h3", "h4", "h5", "h6", "header", "hr", "html",
    "li", "main", "nav", "ol", "p", "pre", "section", "table", "tbody",
    "td", "th", "thead", "tr", "ul",
}

# Tags whose content never reaches the text blocks.
_SKIP_TAGS = {"script", "style", "noscript", "template"}

_WS_RE = re.compile(r"\s+")


def _utcnow() -> datetime:
    return datetime.now(timezone.utc)


@dataclass(frozen=True)
class CrawlConfig:
    """Limits and identity for one crawl."""

    seed_url: str
    max_pages: int = 500
    max_depth: int = 5
    politeness_delay: int = 250  # ms between fetches to one host
    fetch_timeout: int = 10_000  # ms
    user_agent: str = DEFAULT_USER_AGENT
    workers: int = 4
    keep_query: bool = False  # keep ?query strings when normalizing URLs

    def __post_init__(self):
        parts = urlsplit(self.seed_url)
        if parts.scheme not in ("http", "https") or not parts.netloc:
            raise ValueError(f"seed_url must be an absolute http(s) URL, got {self.seed_url!r}")
        if self.max_pages < 1:
            raise ValueError("max_pages must be >= 1")
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.politeness_delay < 0:
            raise ValueError("politeness_delay must be >= 0")
        if self.fetch_timeout <= 0:
            raise ValueError("fetch_timeout must be > 0")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class Page:
    """One fetched resource, before any parsing."""

    url: str
    status: int
    content_type: str
    body: bytes
    fetched_at: datetime = field(default_factory=_utcnow)


@dataclass(frozen=True)
class Document:
    """Extracted text of one HTML page.

    ``blocks`` holds the visible text in reading order, one entry per
    block-level region; ``links`` holds the normalized same-host anchor
    targets, deduplicated, first occurrence first.
    """

    url: str
    title: str
    blocks: tuple[str, ...]
    links: tuple[str, ...]

    def joined_text(self) -> str:
        return "\n".join(self.blocks)


@dataclass(frozen=True)
class SkipRecord:
    """Why a URL was dequeued but produced no document."""

    url: str
    reason: str


@dataclass
class Corpus:
    """All documents gathered by one crawl, in fetch order."""

    seed_url: str
    crawl_started_at: datetime
    documents: list[Document] = field(default_factory=list)
    skipped: list[SkipRecord] = field(default_factory=list)


def normalize_url(raw: str, base: str, keep_query: bool = False) -> str:
    """Resolve ``raw`` against ``base`` into a canonical same-host URL.

    Fragments are dropped, and query strings too unless ``keep_query``;
    scheme and host are lowercased. Raises :class:`UrlRejected` for empty
    or fragment-only references, non-http(s) schemes, cross-host targets
    and unparsable input.
    """
    raw = (raw or "").strip()
    if not raw:
        raise UrlRejected("empty", raw)
    if raw.startswith("#"):
        raise UrlRejected("fragment-only", raw)
    try:
        resolved = urlsplit(urljoin(base, raw))
        base_host = (urlsplit(base).hostname or "").lower()
    except ValueError:
        raise UrlRejected("unparsable", raw) from None
    scheme = resolved.scheme.lower()
    if scheme not in ("http", "https"):
        raise UrlRejected("scheme", raw)
    host = (resolved.hostname or "").lower()
    if not host:
        raise UrlRejected("unparsable", raw)
    if host != base_host:
        raise UrlRejected("cross-host", raw)
    query = resolved.query if keep_query else ""
    return urlunsplit((scheme, resolved.netloc.lower(), resolved.path or "/", query, ""))


class _TextExtractor(HTMLParser):
    """Collects block-grouped text, the title and raw anchor hrefs."""

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.blocks: list[str] = []
        self.hrefs: list[str] = []
        self.title = ""
        self._buf: list[str] = []
        self._skip_depth = 0
        self._title_buf: list[str] = []
        self._in_title = False

    def handle_starttag(self, tag, attrs):
        if tag in _SKIP_TAGS:
            self._skip_depth += 1
            return
        if tag == "title":
            self._in_title = True
            return
        if tag == "a":
            for name, value in attrs:
                if name == "href" and value is not None:
                    self.hrefs.append(value)
        if tag in _BLOCK_TAGS:
            self._flush()

    def handle_endtag(self, tag):
        if tag in _SKIP_TAGS:
            if self._skip_depth:
                self._skip_depth -= 1
            return
        if tag == "title":
            self._in_title = False
            return
        if tag in _BLOCK_TAGS:
            self._flush()

    def handle_data(self, data):
        if self._skip_depth:
            return
        if self._in_title:
            self._title_buf.append(data)
        else:
            self._buf.append(data)

    def _flush(self):
        text = _WS_RE.sub(" ", "".join(self._buf)).strip()
        if text:
            self.blocks.append(text)
        self._buf.clear()

    def finish(self):
        self.close()
        self._flush()
        self.title = _WS_RE.sub(" ", "".join(self._title_buf)).strip()


def _media_type(content_type: str) -> str:
    return content_type.split(";", 1)[0].strip().lower()


def _charset(content_type: str) -> str:
    match = re.search(r"charset=([^\s;]+)", content_type, re.IGNORECASE)
    return match.group(1).strip("\"'") if match else "utf-8"


def extract_document(page: Page, keep_query: bool = False) -> Document:
    """Convert a fetched HTML page into a :class:`Document`.

    Script, style and noscript content is discarded; anchor hrefs are
    normalized against the page URL and silently dropped when rejected.
    Raises :class:`NotHtml` when the content type is not an HTML type.
    """
    if _media_type(page.content_type) not in _HTML_MEDIA_TYPES:
        raise NotHtml(f"{page.url}: content-type {page.content_type!r}")
    try:
        html = page.body.decode(_charset(page.content_type), errors="replace")
    except LookupError:
        html = page.body.decode("utf-8", errors="replace")
    parser = _TextExtractor()
    parser.feed(html)
    parser.finish()

    links: list[str] = []
    seen: set[str] = set()
    for href in parser.hrefs:
        try:
            url = normalize_url(href, page.url, keep_query=keep_query)
        except UrlRejected:
            continue
        if url not in seen:
            seen.add(url)
            links.append(url)
    return Document(url=page.url, title=parser.title, blocks=tuple(parser.blocks), links=tuple(links))


class _HostThrottle:
    """Serializes the per-host fetch schedule across worker threads."""

    def __init__(self, delay_s: float):
        self._delay = delay_s
        self._next_ok: dict[str, float] = {}
        self._lock = threading.Lock()

    def wait(self, host: str):
        if self._delay <= 0:
            return
        with self._lock:
            now = time.monotonic()
            slot = max(self._next_ok.get(host, now), now)
            self._next_ok[host] = slot + self._delay
        pause = slot - now
        if pause > 0:
            time.sleep(pause)


def _load_robots(fetcher: PageFetcher, seed: str, throttle: _HostThrottle) -> robotparser.RobotFileParser | None:
    """Fetch and parse robots.txt once; any failure means allow-all."""
    parts = urlsplit(seed)
    robots_url = urlunsplit((parts.scheme, parts.netloc, "/robots.txt", "", ""))
    try:
        throttle.wait(parts.netloc)
        page = fetcher.fetch(robots_url)
    except FetchError:
        return None
    if not (200 <= page.status < 300):
        return None
    parser = robotparser.RobotFileParser()
    parser.parse(page.body.decode("utf-8", errors="replace").splitlines())
    return parser


def crawl(config: CrawlConfig, fetcher: PageFetcher) -> Corpus:
    """Breadth-first same-origin crawl from ``config.seed_url``.

    Every normalized URL is fetched at most once; traversal stops when the
    frontier drains, ``max_pages`` fetches have been spent or links would
    exceed ``max_depth``. Per-page failures are recorded in
    ``Corpus.skipped``; only a failing seed is fatal (:class:`SeedUnreachable`).
    robots.txt is honored when present, and a robots rule that blocks the
    seed itself is treated as the seed being unreachable.
    """
    seed = normalize_url(config.seed_url, config.seed_url, keep_query=config.keep_query)
    throttle = _HostThrottle(config.politeness_delay / 1000.0)
    robots = _load_robots(fetcher, seed, throttle)
    if robots is not None and not robots.can_fetch(config.user_agent, seed):
        raise SeedUnreachable(f"robots.txt disallows the seed {seed}")

    corpus = Corpus(seed_url=seed, crawl_started_at=_utcnow())
    visited = {seed}
    frontier: deque[tuple[str, int]] = deque([(seed, 0)])
    budget = config.max_pages

    def fetch_one(url: str) -> Page:
        throttle.wait(urlsplit(url).netloc)
        return fetcher.fetch(url)

    def handle(url: str, depth: int, page: Page | None, exc: Exception | None):
        if exc is not None:
            if url == seed:
                raise SeedUnreachable(f"{seed}: {exc}") from exc
            corpus.skipped.append(SkipRecord(url, f"fetch-error: {exc}"))
            return
        assert page is not None
        if not (200 <= page.status < 300):
            if url == seed:
                raise SeedUnreachable(f"{seed}: HTTP {page.status}")
            corpus.skipped.append(SkipRecord(url, f"http-status: {page.status}"))
            return
        try:
            doc = extract_document(page, keep_query=config.keep_query)
        except NotHtml:
            corpus.skipped.append(SkipRecord(url, f"not-html: {page.content_type}"))
            return
        corpus.documents.append(doc)
        if depth >= config.max_depth:
            return
        for link in doc.links:
            if link not in visited:
                visited.add(link)
                frontier.append((link, depth + 1))

    pool = ThreadPoolExecutor(max_workers=config.workers) if config.workers > 1 else None
    try:
        while frontier and budget > 0:
            wave: list[tuple[str, int]] = []
            while frontier and len(wave) < budget:
                url, depth = frontier.popleft()
                if robots is not None and not robots.can_fetch(config.user_agent, url):
                    corpus.skipped.append(SkipRecord(url, "robots-disallow"))
                    continue
                wave.append((url, depth))
            budget -= len(wave)
            if not wave:
                continue
            if pool is None:
                for url, depth in wave:
                    try:
                        page = fetch_one(url)
                    except FetchError as exc:
                        handle(url, depth, None, exc)
                    else:
                        handle(url, depth, page, None)
            else:
                futures = {pool.submit(fetch_one, url): (url, depth) for url, depth in wave}
                for future in as_completed(futures):
                    url, depth = futures[future]
                    try:
                        page = future.result()
                    except FetchError as exc:
                        handle(url, depth, None, exc)
                    else:
                        handle(url, depth, page, None)
    finally:
        if pool is not None:
            pool.shutdown(wait=False)
    return corpus


def save_corpus_jsonl(corpus: Corpus, path: str | Path):
    """Write one JSON object per document: url, title, blocks, links."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc in corpus.documents:
            row = {
                "url": doc.url,
                "title": doc.title,
                "blocks": list(doc.blocks),
                "links": list(doc.links),
            }
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def load_documents_jsonl(path: str | Path) -> list[Document]:
    docs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            docs.append(
                Document(
                    url=row["url"],
                    title=row.get("title", ""),
                    blocks=tuple(row.get("blocks", ())),
                    links=tuple(row.get("links", ())),
                )
            )
    return docs
