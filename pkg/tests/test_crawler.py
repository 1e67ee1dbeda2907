"""Crawler, URL normalization and HTML extraction tests.

The fixture-site expectations are hand-enumerated from the bundled HTML
files (the oracle is the link graph itself, walked by eye).
"""

import time

import pytest

from sitegrounder import fixtures
from sitegrounder.crawler import (
    CrawlConfig,
    Page,
    crawl,
    extract_document,
    load_documents_jsonl,
    normalize_url,
    save_corpus_jsonl,
)
from sitegrounder.errors import NotHtml, SeedUnreachable, UrlRejected
from sitegrounder.fetchers import InMemoryFetcher


SEED = fixtures.FIXTURE_SEED_URL


def make_page(url, html, content_type="text/html; charset=utf-8", status=200):
    return Page(url=url, status=status, content_type=content_type, body=html.encode("utf-8"))


class TestNormalizeUrl:
    def test_relative_resolution(self):
        assert normalize_url("about.html", "https://x.example/dir/") == "https://x.example/dir/about.html"

    def test_fragment_only_rejected(self):
        with pytest.raises(UrlRejected) as exc:
            normalize_url("#top", "https://x.example/a")
        assert exc.value.reason == "fragment-only"

    def test_cross_host_rejected(self):
        with pytest.raises(UrlRejected) as exc:
            normalize_url("https://other.example/", "https://x.example/")
        assert exc.value.reason == "cross-host"

    @pytest.mark.parametrize("raw", ["mailto:info@x.example", "javascript:void(0)", "tel:+123", "ftp://x.example/f"])
    def test_non_http_schemes_rejected(self, raw):
        with pytest.raises(UrlRejected) as exc:
            normalize_url(raw, "https://x.example/")
        assert exc.value.reason == "scheme"

    def test_empty_rejected(self):
        with pytest.raises(UrlRejected) as exc:
            normalize_url("   ", "https://x.example/")
        assert exc.value.reason == "empty"

    def test_unparsable_rejected(self):
        with pytest.raises(UrlRejected):
            normalize_url("http://[invalid", "https://x.example/")

    def test_fragment_stripped_from_real_link(self):
        assert normalize_url("page.html#sec2", "https://x.example/") == "https://x.example/page.html"

    def test_query_dropped_by_default_kept_on_request(self):
        assert normalize_url("/p?a=1", "https://x.example/") == "https://x.example/p"
        assert normalize_url("/p?a=1", "https://x.example/", keep_query=True) == "https://x.example/p?a=1"

    def test_scheme_and_host_lowercased(self):
        assert normalize_url("HTTPS://X.EXAMPLE/Path", "https://x.example/") == "https://x.example/Path"

    def test_bare_host_gets_root_path(self):
        assert normalize_url("https://x.example", "https://x.example/") == "https://x.example/"


class TestExtractDocument:
    def test_script_content_stripped(self):
        page = make_page("https://x.example/", "<html><body><p>Hello</p><script>x()</script></body></html>")
        doc = extract_document(page)
        assert doc.blocks == ("Hello",)
        assert doc.links == ()

    def test_style_and_noscript_stripped(self):
        html = "<body><style>p{}</style><noscript>enable js</noscript><p>Text</p></body>"
        doc = extract_document(make_page("https://x.example/", html))
        assert doc.blocks == ("Text",)

    def test_fixture_page_three_paragraphs_two_links(self, site_fetcher):
        # admissions.html was written with exactly 3 <p> blocks and 2 same-host anchors
        page = site_fetcher.fetch("https://fixture.test/admissions.html")
        doc = extract_document(page)
        assert len(doc.blocks) == 3
        assert len(doc.links) == 2
        assert doc.links == ("https://fixture.test/academics.html", "https://fixture.test/about.html")

    def test_non_html_content_type_raises(self):
        page = Page(url="https://x.example/f.pdf", status=200,
                    content_type="application/pdf", body=b"%PDF-1.4")
        with pytest.raises(NotHtml):
            extract_document(page)

    def test_title_extracted_not_a_block(self):
        html = "<html><head><title>My Title</title></head><body><p>Body</p></body></html>"
        doc = extract_document(make_page("https://x.example/", html))
        assert doc.title == "My Title"
        assert doc.blocks == ("Body",)

    def test_links_deduplicated_first_occurrence_order(self):
        html = '<body><a href="/b">1</a><a href="/a">2</a><a href="/b">3</a></body>'
        doc = extract_document(make_page("https://x.example/", html))
        assert doc.links == ("https://x.example/b", "https://x.example/a")

    def test_rejected_links_dropped_silently(self):
        html = '<body><a href="mailto:x@y">m</a><a href="https://other.example/">x</a><a href="/ok">k</a></body>'
        doc = extract_document(make_page("https://x.example/", html))
        assert doc.links == ("https://x.example/ok",)

    def test_whitespace_collapsed_inside_blocks(self):
        html = "<body><p>  a\n   b\tc  </p></body>"
        doc = extract_document(make_page("https://x.example/", html))
        assert doc.blocks == ("a b c",)

    def test_inline_tags_do_not_split_blocks(self):
        html = "<body><p>one <em>two</em> three</p><div>four</div></body>"
        doc = extract_document(make_page("https://x.example/", html))
        assert doc.blocks == ("one two three", "four")

    def test_pure_function_same_bytes_same_document(self):
        page = make_page("https://x.example/", "<body><p>stable</p><a href='/l'>l</a></body>")
        assert extract_document(page) == extract_document(page)

    def test_entity_references_decoded(self):
        doc = extract_document(make_page("https://x.example/", "<body><p>fish &amp; chips</p></body>"))
        assert doc.blocks == ("fish & chips",)


# Hand-enumerated from the fixture HTML files: every reachable page.
EXPECTED_SITE_URLS = {
    SEED,
    SEED + "about.html",
    SEED + "history.html",
    SEED + "campus.html",
    SEED + "academics.html",
    SEED + "admissions.html",
    SEED + "clubs/ieee.html",
    SEED + "clubs/robotics.html",
    SEED + "news.html",
    SEED + "events/icwstcsc.html",
    SEED + "departments/mechanical.html",
    SEED + "departments/electronics.html",
}


class TestCrawl:
    def test_fixture_site_full_coverage(self, fixture_corpus):
        urls = [doc.url for doc in fixture_corpus.documents]
        assert sorted(urls) == sorted(EXPECTED_SITE_URLS)
        assert len(urls) == len(set(urls)) == 12

    def test_expected_urls_match_packaged_enumeration(self):
        assert EXPECTED_SITE_URLS == set(fixtures.FIXTURE_SITE_URLS)

    def test_each_url_fetched_at_most_once(self, site_fetcher):
        counting = _CountingFetcher(site_fetcher)
        config = CrawlConfig(seed_url=SEED, max_pages=100, politeness_delay=0, workers=1)
        crawl(config, counting)
        content_calls = [u for u in counting.calls if not u.endswith("robots.txt")]
        assert len(content_calls) == len(set(content_calls)) == 12

    def test_single_page_no_links(self):
        fetcher = InMemoryFetcher.from_html({"https://one.example/": "<body><p>alone</p></body>"})
        corpus = crawl(CrawlConfig(seed_url="https://one.example/", politeness_delay=0, workers=1), fetcher)
        assert len(corpus.documents) == 1
        assert corpus.documents[0].blocks == ("alone",)

    def test_real_college_homepage_is_valid_seed(self):
        config = CrawlConfig(seed_url="https://bvmengineering.ac.in/")
        assert config.seed_url == "https://bvmengineering.ac.in/"

    def test_max_pages_budget_respected(self, site_fetcher):
        config = CrawlConfig(seed_url=SEED, max_pages=5, politeness_delay=0, workers=1)
        corpus = crawl(config, site_fetcher)
        assert len(corpus.documents) <= 5

    def test_max_depth_zero_fetches_only_seed(self, site_fetcher):
        config = CrawlConfig(seed_url=SEED, max_depth=0, politeness_delay=0, workers=1)
        corpus = crawl(config, site_fetcher)
        assert [d.url for d in corpus.documents] == [SEED]

    def test_seed_unreachable_is_fatal(self):
        fetcher = InMemoryFetcher({}, fail={"https://gone.example/"})
        with pytest.raises(SeedUnreachable):
            crawl(CrawlConfig(seed_url="https://gone.example/", politeness_delay=0, workers=1), fetcher)

    def test_seed_http_error_is_fatal(self):
        fetcher = InMemoryFetcher({"https://x.example/": (500, "text/html", b"")})
        with pytest.raises(SeedUnreachable):
            crawl(CrawlConfig(seed_url="https://x.example/", politeness_delay=0, workers=1), fetcher)

    def test_per_page_errors_recorded_not_fatal(self):
        pages = {
            "https://x.example/": (200, "text/html", b'<body><p>root</p><a href="/dead">d</a><a href="/err">e</a></body>'),
        }
        fetcher = InMemoryFetcher(pages, fail={"https://x.example/err"})
        corpus = crawl(CrawlConfig(seed_url="https://x.example/", politeness_delay=0, workers=1), fetcher)
        assert len(corpus.documents) == 1
        reasons = {rec.url: rec.reason for rec in corpus.skipped}
        assert "https://x.example/dead" in reasons  # 404
        assert "https://x.example/err" in reasons  # transport failure

    def test_non_html_pages_skipped_with_record(self):
        pages = {
            "https://x.example/": (200, "text/html", b'<body><a href="/doc.pdf">pdf</a></body>'),
            "https://x.example/doc.pdf": (200, "application/pdf", b"%PDF"),
        }
        corpus = crawl(CrawlConfig(seed_url="https://x.example/", politeness_delay=0, workers=1),
                       InMemoryFetcher(pages))
        assert len(corpus.documents) == 1
        assert any("not-html" in rec.reason for rec in corpus.skipped)

    def test_robots_disallow_honored(self):
        pages = {
            "https://x.example/robots.txt": (200, "text/plain", b"User-agent: *\nDisallow: /private\n"),
            "https://x.example/": (200, "text/html", b'<body><a href="/private/a">p</a><a href="/pub">q</a></body>'),
            "https://x.example/private/a": (200, "text/html", b"<body><p>secret</p></body>"),
            "https://x.example/pub": (200, "text/html", b"<body><p>open</p></body>"),
        }
        fetcher = InMemoryFetcher(pages)
        corpus = crawl(CrawlConfig(seed_url="https://x.example/", politeness_delay=0, workers=1), fetcher)
        urls = {d.url for d in corpus.documents}
        assert "https://x.example/private/a" not in urls
        assert "https://x.example/pub" in urls
        assert "https://x.example/private/a" not in fetcher.calls
        assert any(rec.reason == "robots-disallow" for rec in corpus.skipped)

    def test_robots_absence_allows_all(self, fixture_corpus):
        # DirectoryFetcher has no robots.txt file: 404 means allow-all.
        assert len(fixture_corpus.documents) == 12

    def test_rerun_identical_modulo_timestamps(self, site_fetcher):
        config = CrawlConfig(seed_url=SEED, max_pages=100, politeness_delay=0, workers=1)
        first = crawl(config, site_fetcher)
        second = crawl(config, site_fetcher)
        assert first.documents == second.documents

    def test_parallel_workers_reach_same_url_set(self, site_fetcher, fixture_corpus):
        config = CrawlConfig(seed_url=SEED, max_pages=100, politeness_delay=0, workers=4)
        corpus = crawl(config, site_fetcher)
        assert {d.url for d in corpus.documents} == {d.url for d in fixture_corpus.documents}

    def test_corpus_jsonl_round_trip(self, fixture_corpus, tmp_path):
        path = tmp_path / "corpus.jsonl"
        save_corpus_jsonl(fixture_corpus, path)
        docs = load_documents_jsonl(path)
        assert docs == fixture_corpus.documents

    def test_politeness_delay_spaces_same_host_fetches(self):
        pages = {
            "https://x.example/": (200, "text/html", b'<body><a href="/a">a</a><a href="/b">b</a></body>'),
            "https://x.example/a": (200, "text/html", b"<body><p>a</p></body>"),
            "https://x.example/b": (200, "text/html", b"<body><p>b</p></body>"),
        }
        config = CrawlConfig(seed_url="https://x.example/", politeness_delay=50, workers=2)
        started = time.monotonic()
        corpus = crawl(config, InMemoryFetcher(pages))
        elapsed = time.monotonic() - started
        assert len(corpus.documents) == 3
        # 4 fetches to one host (robots + 3 pages) at >= 50 ms spacing.
        assert elapsed >= 0.12

    def test_invalid_config_rejected(self):
        with pytest.raises(ValueError):
            CrawlConfig(seed_url="notaurl")
        with pytest.raises(ValueError):
            CrawlConfig(seed_url="https://x.example/", max_pages=0)
        with pytest.raises(ValueError):
            CrawlConfig(seed_url="https://x.example/", max_depth=-1)


class _CountingFetcher:
    def __init__(self, inner):
        self._inner = inner
        self.calls = []

    def fetch(self, url):
        self.calls.append(url)
        return self._inner.fetch(url)
