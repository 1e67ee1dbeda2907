import pytest

from sitegrounder import fixtures
from sitegrounder.chunker import ChunkingConfig, chunk_documents
from sitegrounder.crawler import CrawlConfig, crawl
from sitegrounder.embedding import StubEmbedder
from sitegrounder.fetchers import DirectoryFetcher
from sitegrounder.vector_index import VectorIndex


@pytest.fixture(scope="session")
def site_fetcher():
    return DirectoryFetcher(fixtures.site_root())


@pytest.fixture(scope="session")
def fixture_corpus(site_fetcher):
    config = CrawlConfig(seed_url=fixtures.FIXTURE_SEED_URL, max_pages=100,
                         politeness_delay=0, workers=1)
    return crawl(config, site_fetcher)


@pytest.fixture(scope="session")
def stub_embedder():
    return StubEmbedder(dim=64)


@pytest.fixture(scope="session")
def fixture_index(fixture_corpus, stub_embedder):
    """Stub-embedded index over the fixture site's chunks."""
    chunks = chunk_documents(fixture_corpus.documents, ChunkingConfig())
    index = VectorIndex(dim=stub_embedder.dim)
    vectors = stub_embedder.embed_batch([c.text for c in chunks])
    for chunk, vector in zip(chunks, vectors):
        index.add(chunk.chunk_id, vector, {"source_url": chunk.source_url, "text": chunk.text})
    return index
