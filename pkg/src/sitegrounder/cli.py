"""Operator command line: one subcommand per pipeline stage.

Each stage reads and writes the file formats owned by the core modules
(corpus and questions as JSON Lines, the index as a .vidx binary, eval
reports as a single JSON document), so runs can be snapshotted and
resumed stage by stage without the HTTP service.
"""

from __future__ import annotations

import contextlib
import os
import sys

import click

from . import fixtures as bundled_fixtures
from .chunker import ChunkingConfig, chunk_documents
from .conversation import ChatSession, ModelProfile, answer_turn, make_llm_client
from .crawler import CrawlConfig, crawl, load_documents_jsonl, save_corpus_jsonl
from .embedding import EmbedderProfile, make_embedder
from .errors import SitegrounderError
from .evalharness import annotate_rating, load_questions_jsonl, load_report, run_eval, save_report
from .fetchers import DirectoryFetcher, HttpFetcher
from .service import ServiceConfig, serve
from .vector_index import VectorIndex


@contextlib.contextmanager
def cleanup_on_failure(*paths: str):
    """Remove partially written outputs when the stage fails."""
    try:
        yield
    except Exception:
        for path in paths:
            with contextlib.suppress(OSError):
                os.remove(path)
        raise


def fail(message: str) -> click.ClickException:
    return click.ClickException(message)


@click.group()
def main():
    """Site-grounded retrieval chatbot pipeline."""


@main.command("crawl")
@click.option("--seed", required=True, help="Absolute http(s) seed URL.")
@click.option("--max-pages", default=500, show_default=True, type=int)
@click.option("--max-depth", default=5, show_default=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--fixture-root", type=click.Path(exists=True, file_okay=False),
              help="Serve the crawl from this directory instead of live HTTP.")
@click.option("--delay-ms", default=250, show_default=True, type=int)
@click.option("--timeout-ms", default=10_000, show_default=True, type=int)
@click.option("--workers", default=4, show_default=True, type=int)
@click.option("--user-agent", default=None)
@click.option("--keep-query", is_flag=True, help="Keep ?query strings in URLs.")
def crawl_command(seed, max_pages, max_depth, out_path, fixture_root, delay_ms,
                  timeout_ms, workers, user_agent, keep_query):
    """Crawl a site into a corpus.jsonl file."""
    try:
        config = CrawlConfig(
            seed_url=seed, max_pages=max_pages, max_depth=max_depth,
            politeness_delay=delay_ms, fetch_timeout=timeout_ms,
            workers=workers, keep_query=keep_query,
            **({"user_agent": user_agent} if user_agent else {}),
        )
    except ValueError as exc:
        raise fail(str(exc)) from exc
    fetcher = DirectoryFetcher(fixture_root) if fixture_root else HttpFetcher(
        user_agent=config.user_agent, timeout_ms=timeout_ms)
    with cleanup_on_failure(out_path):
        try:
            corpus = crawl(config, fetcher)
        except SitegrounderError as exc:
            raise fail(str(exc)) from exc
        save_corpus_jsonl(corpus, out_path)
    click.echo(f"crawled {len(corpus.documents)} pages "
               f"({len(corpus.skipped)} skipped) -> {out_path}")


@main.command("index")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--embedder", "embedder_kind", default="stub", show_default=True,
              type=click.Choice(["stub", "remote"]))
@click.option("--dim", default=64, show_default=True, type=int)
@click.option("--model-id", default="stub-fnv64", show_default=True)
@click.option("--endpoint-url", default="", help="Remote embedder URL (or $SITEGROUNDER_EMBED_URL).")
@click.option("--max-chunk-chars", default=1000, show_default=True, type=int)
@click.option("--overlap-chars", default=200, show_default=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def index_command(corpus_path, embedder_kind, dim, model_id, endpoint_url,
                  max_chunk_chars, overlap_chars, out_path):
    """Chunk and embed a corpus into a .vidx index file."""
    try:
        chunk_config = ChunkingConfig(max_chunk_chars=max_chunk_chars, overlap_chars=overlap_chars)
        profile = EmbedderProfile(kind=embedder_kind, model_id=model_id, dim=dim,
                                  endpoint_url=endpoint_url)
        embedder = make_embedder(profile)
    except ValueError as exc:
        raise fail(str(exc)) from exc
    with cleanup_on_failure(out_path):
        try:
            docs = load_documents_jsonl(corpus_path)
            chunks = chunk_documents(docs, chunk_config)
            vectors = embedder.embed_batch([c.text for c in chunks])
            index = VectorIndex(dim=profile.dim)
            for chunk, vector in zip(chunks, vectors):
                index.add(chunk.chunk_id, vector,
                          {"source_url": chunk.source_url, "text": chunk.text})
            index.save(out_path)
        except SitegrounderError as exc:
            raise fail(str(exc)) from exc
    click.echo(f"indexed {len(index)} chunks from {len(docs)} documents -> {out_path}")


def _load_index(path: str) -> VectorIndex:
    try:
        return VectorIndex.load(path)
    except SitegrounderError as exc:
        raise fail(f"cannot load index {path}: {exc}") from exc


def _llm_from_flags(kind: str, model_id: str, endpoint_url: str, profile_id: str | None = None,
                    max_context_chars: int = 6000):
    profile = ModelProfile(
        profile_id=profile_id or (model_id if kind == "remote" else "stub"),
        kind=kind, model_id=model_id, endpoint_url=endpoint_url,
        max_context_chars=max_context_chars,
    )
    return make_llm_client(profile)


@main.command("chat")
@click.option("--index", "index_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--llm", "llm_kind", default="stub", show_default=True,
              type=click.Choice(["stub", "remote"]))
@click.option("--model-id", default="stub-overlap", show_default=True)
@click.option("--endpoint-url", default="", help="Remote LLM URL (or $SITEGROUNDER_LLM_URL).")
@click.option("--k", default=4, show_default=True, type=int)
def chat_command(index_path, llm_kind, model_id, endpoint_url, k):
    """Interactive chat over an index. Commands: /reset /sources /quit."""
    index = _load_index(index_path)
    embedder = make_embedder(EmbedderProfile(kind="stub", dim=index.dim))
    try:
        llm = _llm_from_flags(llm_kind, model_id, endpoint_url)
    except ValueError as exc:
        raise fail(str(exc)) from exc
    session = ChatSession(model_profile_id=llm.profile_id)
    show_sources = False
    click.echo(f"chatting over {index_path} ({len(index)} chunks); /quit to exit")
    while True:
        try:
            line = click.prompt("you", prompt_suffix="> ", default="", show_default=False)
        except (EOFError, click.Abort):
            break
        line = line.strip()
        if not line:
            continue
        if line == "/quit":
            break
        if line == "/reset":
            session = ChatSession(model_profile_id=llm.profile_id)
            click.echo("history cleared")
            continue
        if line == "/sources":
            show_sources = not show_sources
            click.echo(f"sources {'on' if show_sources else 'off'}")
            continue
        try:
            result = answer_turn(session, line, index, embedder, llm, k=k)
        except SitegrounderError as exc:
            click.echo(f"error: {exc}", err=True)
            continue
        click.echo(result.answer)
        if show_sources:
            for source in result.sources:
                click.echo(f"  [{source.score:.3f}] {source.source_url} ({source.chunk_id})")


@main.command("eval")
@click.option("--questions", "questions_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--index", "index_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--profiles", required=True,
              help="Comma-separated profile ids, e.g. google/flan-t5-xxl,google/flan-t5-base.")
@click.option("--llm", "llm_kind", default="stub", show_default=True,
              type=click.Choice(["stub", "remote"]))
@click.option("--endpoint-url", default="", help="Remote LLM URL (or $SITEGROUNDER_LLM_URL).")
@click.option("--k", default=4, show_default=True, type=int)
@click.option("--report", "report_path", required=True, type=click.Path(dir_okay=False))
@click.option("--run-id", default=None, help="Pin the report's run id (default: random).")
def eval_command(questions_path, index_path, profiles, llm_kind, endpoint_url, k, report_path, run_id):
    """Run a question set under one or more profiles and write a report."""
    index = _load_index(index_path)
    embedder = make_embedder(EmbedderProfile(kind="stub", dim=index.dim))
    profile_ids = [p.strip() for p in profiles.split(",") if p.strip()]
    if not profile_ids:
        raise fail("--profiles must name at least one profile")
    model_profiles = [
        ModelProfile(profile_id=pid, kind=llm_kind,
                     model_id=pid if llm_kind == "remote" else "stub-overlap",
                     endpoint_url=endpoint_url)
        for pid in profile_ids
    ]
    with cleanup_on_failure(report_path):
        try:
            questions = load_questions_jsonl(questions_path)
            report = run_eval(questions, model_profiles, index, embedder, k=k, run_id=run_id)
            save_report(report, report_path)
        except (SitegrounderError, ValueError, KeyError) as exc:
            raise fail(str(exc)) from exc
    click.echo(f"evaluated {len(questions)} questions x {len(model_profiles)} profiles "
               f"-> {report_path}")


@main.command("rate")
@click.option("--report", "report_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--qid", required=True, type=int)
@click.option("--profile", "profile_id", required=True)
@click.option("--stars", required=True, type=int)
def rate_command(report_path, qid, profile_id, stars):
    """Attach a human star rating (1-5) to one record in a report."""
    try:
        report = load_report(report_path)
        annotate_rating(report, qid, profile_id, stars)
        save_report(report, report_path)
    except SitegrounderError as exc:
        raise fail(str(exc)) from exc
    mean = report.aggregates()[profile_id]["mean_rating"]
    click.echo(f"qid {qid} rated {stars} for {profile_id}; mean rating now {mean:.3f}")


@main.command("serve")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--port", type=int, default=None, help="Override the configured port.")
@click.option("--host", default=None, help="Override the configured host.")
def serve_command(config_path, port, host):
    """Serve the chat API from a JSON config file."""
    try:
        config = ServiceConfig.from_file(config_path)
    except (ValueError, OSError) as exc:
        raise fail(f"bad config: {exc}") from exc
    serve(config, host=host, port=port)


@main.group("fixtures")
def fixtures_group():
    """Paths of the bundled offline fixtures."""


@fixtures_group.command("site-root")
def fixtures_site_root():
    """Print the bundled fixture site's directory (for --fixture-root)."""
    click.echo(str(bundled_fixtures.site_root()))


@fixtures_group.command("questions")
@click.option("--profile", "profile_key", default="flan-t5-xxl", show_default=True,
              type=click.Choice(list(bundled_fixtures.PROFILE_KEYS)))
def fixtures_questions(profile_key):
    """Print the bundled question file path for a profile."""
    click.echo(str(bundled_fixtures.questions_path(profile_key)))


if __name__ == "__main__":
    sys.exit(main())
