"""HTTP service: ingestion jobs plus session-scoped chat over the index.

One process serves one site. Sessions live in memory with a sliding TTL;
the index lives on disk and is swapped in atomically when an ingest job
finishes, so queries never observe a half-built index. All error
responses share the envelope ``{"error": {"code": ..., "message": ...}}``.

Configuration is a JSON file (see ``ServiceConfig.from_file``); the
``SITEGROUNDER_EMBED_URL`` / ``SITEGROUNDER_LLM_URL`` environment
variables override the remote endpoints.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .chunker import ChunkingConfig, chunk_documents
from .conversation import ChatSession, ModelProfile, answer_turn, make_llm_client
from .crawler import DEFAULT_USER_AGENT, CrawlConfig, crawl
from .embedding import EmbedderProfile, make_embedder
from .errors import LlmUnavailable, RemoteUnavailable, SitegrounderError
from .fetchers import DirectoryFetcher, HttpFetcher, PageFetcher
from .vector_index import VectorIndex

JOB_STATES = ("pending", "crawling", "embedding", "indexing", "done", "failed")
_ACTIVE_STATES = {"pending", "crawling", "embedding", "indexing"}


@dataclass
class ServiceConfig:
    index_path: str = "index.vidx"
    host: str = "127.0.0.1"
    port: int = 8080
    k: int = 4
    session_ttl_seconds: int = 3600
    max_history_turns: int = 10
    cors_origins: list[str] = field(default_factory=lambda: ["*"])
    embedder: EmbedderProfile = field(default_factory=EmbedderProfile)
    llm: ModelProfile = field(default_factory=lambda: ModelProfile(
        profile_id="stub", kind="stub", model_id="stub-overlap"))
    fetcher_kind: str = "http"  # "http" | "directory"
    fixture_root: str = ""  # directory fetcher root
    crawl_max_pages: int = 500
    crawl_max_depth: int = 5
    crawl_politeness_delay_ms: int = 250
    crawl_timeout_ms: int = 10_000
    crawl_workers: int = 4
    user_agent: str = DEFAULT_USER_AGENT
    chunking: ChunkingConfig = field(default_factory=ChunkingConfig)

    @classmethod
    def from_file(cls, path: str | Path) -> "ServiceConfig":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        embedder = EmbedderProfile(**raw.get("embedder", {})) if "embedder" in raw else EmbedderProfile()
        if "llm" in raw:
            llm = ModelProfile(**raw["llm"])
        else:
            llm = ModelProfile(profile_id="stub", kind="stub", model_id="stub-overlap")
        chunking = ChunkingConfig(**raw.get("chunking", {})) if "chunking" in raw else ChunkingConfig()
        crawl_section = raw.get("crawl", {})
        return cls(
            index_path=raw.get("index_path", "index.vidx"),
            host=raw.get("host", "127.0.0.1"),
            port=raw.get("port", 8080),
            k=raw.get("k", 4),
            session_ttl_seconds=raw.get("session_ttl_seconds", 3600),
            max_history_turns=raw.get("max_history_turns", 10),
            cors_origins=raw.get("cors_origins", ["*"]),
            embedder=embedder,
            llm=llm,
            fetcher_kind=crawl_section.get("fetcher", "http"),
            fixture_root=crawl_section.get("fixture_root", "") or "",
            crawl_max_pages=crawl_section.get("max_pages", 500),
            crawl_max_depth=crawl_section.get("max_depth", 5),
            crawl_politeness_delay_ms=crawl_section.get("politeness_delay_ms", 250),
            crawl_timeout_ms=crawl_section.get("fetch_timeout_ms", 10_000),
            crawl_workers=crawl_section.get("workers", 4),
            user_agent=crawl_section.get("user_agent", DEFAULT_USER_AGENT),
            chunking=chunking,
        )


@dataclass
class IngestJob:
    job_id: str
    seed_url: str
    state: str = "pending"
    pages_fetched: int = 0
    chunks_indexed: int = 0
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "seed_url": self.seed_url,
            "state": self.state,
            "pages_fetched": self.pages_fetched,
            "chunks_indexed": self.chunks_indexed,
            "error": self.error,
        }


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


class SessionStore:
    """In-memory sessions with sliding TTL; expired ids answer 410."""

    def __init__(self, ttl_seconds: int, max_history_turns: int, profile_id: str):
        self._ttl = ttl_seconds
        self._max_turns = max_history_turns
        self._profile_id = profile_id
        self._sessions: dict[str, ChatSession] = {}
        self._last_seen: dict[str, float] = {}
        self._lock = threading.Lock()

    def create(self) -> ChatSession:
        session = ChatSession(
            session_id=uuid.uuid4().hex,
            model_profile_id=self._profile_id,
            max_history_turns=self._max_turns,
        )
        with self._lock:
            self._sessions[session.session_id] = session
            self._last_seen[session.session_id] = time.monotonic()
        return session

    def get(self, session_id: str) -> ChatSession:
        with self._lock:
            session = self._sessions.get(session_id)
            if session is None:
                raise ApiError(404, "unknown-session", f"no session {session_id}")
            if time.monotonic() - self._last_seen[session_id] > self._ttl:
                raise ApiError(410, "expired-session", f"session {session_id} expired")
            self._last_seen[session_id] = time.monotonic()
            return session


class AppState:
    def __init__(self, config: ServiceConfig):
        self.config = config
        self.embedder = make_embedder(config.embedder)
        self.llm = make_llm_client(config.llm)
        self.sessions = SessionStore(config.session_ttl_seconds, config.max_history_turns,
                                     config.llm.profile_id)
        self.jobs: dict[str, IngestJob] = {}
        self.jobs_lock = threading.Lock()
        index_file = Path(config.index_path)
        if index_file.is_file():
            self.index = VectorIndex.load(index_file)
            if self.index.dim != config.embedder.dim:
                raise ValueError(
                    f"index at {index_file} has dim {self.index.dim}, "
                    f"embedder profile says {config.embedder.dim}"
                )
        else:
            self.index = VectorIndex(dim=config.embedder.dim)

    def make_fetcher(self) -> PageFetcher:
        if self.config.fetcher_kind == "directory":
            if not self.config.fixture_root:
                raise ApiError(500, "config", "directory fetcher needs crawl.fixture_root")
            return DirectoryFetcher(self.config.fixture_root)
        return HttpFetcher(user_agent=self.config.user_agent, timeout_ms=self.config.crawl_timeout_ms)

    def active_job(self) -> IngestJob | None:
        for job in self.jobs.values():
            if job.state in _ACTIVE_STATES:
                return job
        return None

    def run_ingest(self, job: IngestJob, crawl_config: CrawlConfig):
        try:
            job.state = "crawling"
            corpus = crawl(crawl_config, self.make_fetcher())
            job.pages_fetched = len(corpus.documents)

            job.state = "embedding"
            chunks = chunk_documents(corpus.documents, self.config.chunking)
            vectors = self.embedder.embed_batch([c.text for c in chunks])

            job.state = "indexing"
            index = VectorIndex(dim=self.embedder.dim)
            for chunk, vector in zip(chunks, vectors):
                index.add(chunk.chunk_id, vector,
                          {"source_url": chunk.source_url, "text": chunk.text})
            job.chunks_indexed = len(index)
            index.save(self.config.index_path)
            self.index = index  # atomic reference swap; readers see old or new
            job.state = "done"
        except Exception as exc:  # noqa: BLE001 - job must record any failure
            job.error = str(exc)
            job.state = "failed"


class IngestRequest(BaseModel):
    seed_url: str
    max_pages: Optional[int] = None
    max_depth: Optional[int] = None


class MessageRequest(BaseModel):
    text: str


def create_app(config: ServiceConfig) -> FastAPI:
    app = FastAPI(title="sitegrounder", version="0.1.0")
    state = AppState(config)
    app.state.grounder = state

    if config.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=config.cors_origins,
            allow_methods=["*"],
            allow_headers=["*"],
        )

    def envelope(status: int, code: str, message: str) -> JSONResponse:
        return JSONResponse(status_code=status, content={"error": {"code": code, "message": message}})

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        return envelope(exc.status, exc.code, exc.message)

    @app.exception_handler(RequestValidationError)
    async def handle_validation(request: Request, exc: RequestValidationError):
        return envelope(400, "bad-request", str(exc.errors()[:1]))

    @app.exception_handler(SitegrounderError)
    async def handle_domain_error(request: Request, exc: SitegrounderError):
        return envelope(500, "internal", str(exc))

    @app.post("/api/ingest", status_code=202)
    def start_ingest(body: IngestRequest):
        try:
            crawl_config = CrawlConfig(
                seed_url=body.seed_url,
                max_pages=body.max_pages if body.max_pages is not None else config.crawl_max_pages,
                max_depth=body.max_depth if body.max_depth is not None else config.crawl_max_depth,
                politeness_delay=config.crawl_politeness_delay_ms,
                fetch_timeout=config.crawl_timeout_ms,
                user_agent=config.user_agent,
                workers=config.crawl_workers,
            )
        except ValueError as exc:
            raise ApiError(400, "invalid-url", str(exc)) from exc
        with state.jobs_lock:
            if state.active_job() is not None:
                raise ApiError(409, "ingest-active", "another ingest job is still running")
            job = IngestJob(job_id=uuid.uuid4().hex, seed_url=body.seed_url)
            state.jobs[job.job_id] = job
        worker = threading.Thread(target=state.run_ingest, args=(job, crawl_config), daemon=True)
        worker.start()
        return {"job_id": job.job_id}

    @app.get("/api/jobs/{job_id}")
    def get_job(job_id: str):
        job = state.jobs.get(job_id)
        if job is None:
            raise ApiError(404, "unknown-job", f"no job {job_id}")
        return job.to_dict()

    @app.post("/api/sessions", status_code=201)
    def create_session():
        session = state.sessions.create()
        return {"session_id": session.session_id}

    @app.post("/api/sessions/{session_id}/messages")
    def post_message(session_id: str, body: MessageRequest):
        session = state.sessions.get(session_id)
        try:
            result = answer_turn(session, body.text, state.index, state.embedder,
                                 state.llm, k=config.k)
        except (RemoteUnavailable, LlmUnavailable) as exc:
            raise ApiError(503, "backend-unavailable", str(exc)) from exc
        return result.to_dict()

    @app.get("/api/sessions/{session_id}/history")
    def get_history(session_id: str):
        session = state.sessions.get(session_id)
        return [
            {"role": m.role, "text": m.text, "at": m.at.isoformat()}
            for m in session.history
        ]

    @app.get("/api/health")
    def health():
        return {
            "status": "ok",
            "index_count": len(state.index),
            "profile": config.llm.profile_id,
        }

    return app


def serve(config: ServiceConfig, host: str | None = None, port: int | None = None):
    """Run the service under uvicorn until interrupted."""
    import uvicorn

    uvicorn.run(create_app(config), host=host or config.host, port=port or config.port)
