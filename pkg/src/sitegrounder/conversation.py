"""Conversational retrieval chain: condense, retrieve, answer, remember.

A turn takes the session history plus a new question, rewrites follow-ups
into standalone questions, embeds the standalone question, pulls the
top-k chunks from the index, asks the LLM client to answer from that
context, and appends the exchange to the session's bounded history.

The stub LLM keeps the chain fully offline and deterministic: condensing
appends the last user message as parenthesized context, answering picks
the context sentence with the highest lowercase-token overlap with the
question.
"""

from __future__ import annotations

import os
import re
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Protocol, Sequence

import httpx

from .embedding import Embedder, tokenize
from .errors import DimensionMismatch, LlmUnavailable, SessionBusy
from .vector_index import SearchHit, VectorIndex

ENV_LLM_URL = "SITEGROUNDER_LLM_URL"

FALLBACK_ANSWER = "I could not find relevant information."

CONDENSE_PROMPT = (
    "Given the following conversation and a follow up question, rephrase the "
    "follow up question to be a standalone question.\n\n"
    "Chat History:\n{history}\n"
    "Follow Up Input: {question}\n"
    "Standalone question:"
)

ANSWER_PROMPT = (
    "Use the following pieces of context to answer the question at the end. "
    "If you don't know the answer, say you don't know.\n\n"
    "{context}\n\n"
    "Question: {question}\n"
    "Helpful Answer:"
)

CONTEXT_SEPARATOR = "\n---\n"

_SENTENCE_SPLIT_RE = re.compile(r"[.?!]+")


def _utcnow() -> datetime:
    return datetime.now(timezone.utc)


@dataclass(frozen=True)
class ChatMessage:
    role: str  # "user" | "assistant"
    text: str
    at: datetime


@dataclass
class ChatSession:
    """Ordered user/assistant transcript plus session metadata."""

    session_id: str = field(default_factory=lambda: uuid.uuid4().hex)
    model_profile_id: str = "stub"
    max_history_turns: int = 10
    history: list[ChatMessage] = field(default_factory=list)
    created_at: datetime = field(default_factory=_utcnow)
    turn_lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)


@dataclass(frozen=True)
class ModelProfile:
    """One LLM backend the chain can run against."""

    profile_id: str
    kind: str  # "stub" | "remote"
    model_id: str
    endpoint_url: str = ""
    max_context_chars: int = 6000

    def __post_init__(self):
        if self.kind not in ("stub", "remote"):
            raise ValueError(f"unknown llm kind {self.kind!r}")
        if self.max_context_chars < 1:
            raise ValueError("max_context_chars must be >= 1")


@dataclass(frozen=True)
class RetrievedContext:
    standalone_question: str
    hits: tuple[SearchHit, ...]
    context_text: str


@dataclass(frozen=True)
class SourceRef:
    chunk_id: str
    source_url: str
    score: float

    def to_dict(self) -> dict:
        return {"chunk_id": self.chunk_id, "source_url": self.source_url, "score": self.score}


@dataclass(frozen=True)
class ChatTurnResult:
    answer: str
    standalone_question: str
    sources: tuple[SourceRef, ...]

    def to_dict(self) -> dict:
        return {
            "answer": self.answer,
            "standalone_question": self.standalone_question,
            "sources": [s.to_dict() for s in self.sources],
        }


def render_history(history: Sequence[ChatMessage]) -> str:
    labels = {"user": "Human", "assistant": "Assistant"}
    return "\n".join(f"{labels.get(m.role, m.role)}: {m.text}" for m in history)


class LlmClient(Protocol):
    profile_id: str
    max_context_chars: int

    def condense(self, history: Sequence[ChatMessage], question: str) -> str: ...

    def answer(self, context_text: str, question: str) -> str: ...


def stub_condense(history: Sequence[ChatMessage], question: str) -> str:
    """No history: the question itself. Otherwise tack on the last user message."""
    if not history:
        return question
    last_user = next((m.text for m in reversed(history) if m.role == "user"), None)
    if last_user is None:
        return question
    return f"{question} (in the context of: {last_user})"


def stub_answer(context_text: str, question: str) -> str:
    """The context sentence sharing the most lowercase tokens with the question.

    Sentences are the [.?!]-separated pieces of the context; ties go to the
    earliest sentence; no usable context gives the fixed fallback string.
    """
    sentences = [s.strip() for s in _SENTENCE_SPLIT_RE.split(context_text) if s.strip()]
    if not sentences:
        return FALLBACK_ANSWER
    question_tokens = set(tokenize(question))
    best, best_overlap = sentences[0], -1
    for sentence in sentences:
        overlap = len(question_tokens & set(tokenize(sentence)))
        if overlap > best_overlap:
            best, best_overlap = sentence, overlap
    return best


class StubLlm:
    """Deterministic offline LLM client."""

    def __init__(self, profile_id: str = "stub", max_context_chars: int = 6000):
        self.profile_id = profile_id
        self.max_context_chars = max_context_chars

    def condense(self, history: Sequence[ChatMessage], question: str) -> str:
        return stub_condense(history, question)

    def answer(self, context_text: str, question: str) -> str:
        return stub_answer(context_text, question)


class RemoteLlm:
    """HTTP client for a remote text-generation endpoint.

    Sends POST ``{"model", "prompt", "max_new_tokens"}`` and expects
    ``{"text": ...}`` back.
    """

    def __init__(self, profile: ModelProfile, client: httpx.Client | None = None,
                 max_new_tokens: int = 256, timeout_s: float = 60.0):
        endpoint = profile.endpoint_url or os.environ.get(ENV_LLM_URL, "")
        if not endpoint:
            raise ValueError(f"remote llm needs endpoint_url or ${ENV_LLM_URL}")
        self.profile = profile
        self.profile_id = profile.profile_id
        self.max_context_chars = profile.max_context_chars
        self.endpoint_url = endpoint
        self.max_new_tokens = max_new_tokens
        self._client = client or httpx.Client(timeout=timeout_s)

    def _generate(self, prompt: str) -> str:
        payload = {
            "model": self.profile.model_id,
            "prompt": prompt,
            "max_new_tokens": self.max_new_tokens,
        }
        try:
            resp = self._client.post(self.endpoint_url, json=payload)
        except httpx.HTTPError as exc:
            raise LlmUnavailable(f"{self.endpoint_url}: {exc}") from exc
        if resp.status_code != 200:
            raise LlmUnavailable(f"{self.endpoint_url}: HTTP {resp.status_code}")
        try:
            text = resp.json()["text"]
        except (ValueError, KeyError) as exc:
            raise LlmUnavailable(f"{self.endpoint_url}: malformed response") from exc
        if not isinstance(text, str):
            raise LlmUnavailable(f"{self.endpoint_url}: non-string text field")
        return text

    def condense(self, history: Sequence[ChatMessage], question: str) -> str:
        prompt = CONDENSE_PROMPT.format(history=render_history(history), question=question)
        return self._generate(prompt)

    def answer(self, context_text: str, question: str) -> str:
        prompt = ANSWER_PROMPT.format(context=context_text, question=question)
        return self._generate(prompt)

    def close(self):
        self._client.close()


def make_llm_client(profile: ModelProfile, client: httpx.Client | None = None) -> LlmClient:
    if profile.kind == "stub":
        return StubLlm(profile_id=profile.profile_id, max_context_chars=profile.max_context_chars)
    return RemoteLlm(profile, client=client)


def condense_question(history: Sequence[ChatMessage], question: str, llm: LlmClient) -> str:
    """Standalone rewrite of ``question``; with no history it passes through verbatim."""
    if not history:
        return question
    return llm.condense(history, question).strip()


def build_context(standalone_question: str, hits: Sequence[SearchHit], max_context_chars: int) -> RetrievedContext:
    joined = CONTEXT_SEPARATOR.join(str(hit.metadata.get("text", "")) for hit in hits)
    return RetrievedContext(
        standalone_question=standalone_question,
        hits=tuple(hits),
        context_text=joined[:max_context_chars],
    )


def answer_turn(session: ChatSession, question: str, index: VectorIndex,
                embedder: Embedder, llm: LlmClient, k: int = 4,
                wait: bool = True) -> ChatTurnResult:
    """Run one full turn on ``session`` and append the exchange to its history.

    Turns on one session are serialized; with ``wait=False`` a second
    concurrent turn raises :class:`SessionBusy` instead of blocking.
    """
    if index.dim != embedder.dim:
        raise DimensionMismatch(f"index dim {index.dim} != embedder dim {embedder.dim}")
    if not session.turn_lock.acquire(blocking=wait):
        raise SessionBusy(session.session_id)
    try:
        standalone = condense_question(session.history, question, llm)
        query_vec = embedder.embed_batch([standalone])[0]
        hits = index.search(query_vec, k)
        context = build_context(standalone, hits, llm.max_context_chars)
        answer = llm.answer(context.context_text, standalone)

        now = _utcnow()
        session.history.append(ChatMessage("user", question, now))
        session.history.append(ChatMessage("assistant", answer, now))
        overflow = len(session.history) - 2 * session.max_history_turns
        if overflow > 0:
            del session.history[:overflow]

        sources = tuple(
            SourceRef(hit.chunk_id, str(hit.metadata.get("source_url", "")), hit.score)
            for hit in hits
        )
        return ChatTurnResult(answer=answer, standalone_question=standalone, sources=sources)
    finally:
        session.turn_lock.release()
