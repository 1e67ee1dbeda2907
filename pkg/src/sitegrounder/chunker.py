"""Sliding-window text chunking with character budgets and overlap.

Document blocks are joined with newlines and cut into windows of at most
``max_chunk_chars`` characters. Each next window starts ``overlap_chars``
before the previous window's end, so consecutive chunks share context.
A window that would end mid-word is snapped backward to the last
whitespace inside it, provided that still leaves the window extending
past the overlap region (which keeps forward progress and full coverage).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .crawler import Document


@dataclass(frozen=True)
class ChunkingConfig:
    max_chunk_chars: int = 1000
    overlap_chars: int = 200

    def __post_init__(self):
        if self.max_chunk_chars < 1:
            raise ValueError("max_chunk_chars must be >= 1")
        if self.overlap_chars < 0:
            raise ValueError("overlap_chars must be >= 0")
        if self.overlap_chars >= self.max_chunk_chars:
            raise ValueError("overlap_chars must be < max_chunk_chars")


@dataclass(frozen=True)
class Chunk:
    """A contiguous span of a document's joined block text."""

    chunk_id: str
    source_url: str
    text: str
    start_offset: int
    end_offset: int


def chunk_spans(text: str, cfg: ChunkingConfig) -> list[tuple[int, int]]:
    """Window [start, end) spans for ``text`` under the rule above."""
    n = len(text)
    spans: list[tuple[int, int]] = []
    start = 0
    while start < n:
        end = min(start + cfg.max_chunk_chars, n)
        if end < n and not text[end].isspace() and not text[end - 1].isspace():
            # Mid-word cut: snap back to just after the last whitespace in
            # the window, unless that would not clear the overlap region.
            snap = -1
            for i in range(end - 1, start, -1):
                if text[i].isspace():
                    snap = i
                    break
            if snap >= 0 and (snap + 1 - start) > cfg.overlap_chars:
                end = snap + 1
        spans.append((start, end))
        if end >= n:
            break
        start = end - cfg.overlap_chars
    return spans


def chunk_document(doc: Document, cfg: ChunkingConfig = ChunkingConfig()) -> list[Chunk]:
    """Split one document into ordered chunks; empty documents give []."""
    text = doc.joined_text()
    if not text:
        return []
    return [
        Chunk(
            chunk_id=f"{doc.url}#{ordinal}",
            source_url=doc.url,
            text=text[start:end],
            start_offset=start,
            end_offset=end,
        )
        for ordinal, (start, end) in enumerate(chunk_spans(text, cfg))
    ]


def chunk_documents(docs: Iterable[Document], cfg: ChunkingConfig = ChunkingConfig()) -> list[Chunk]:
    chunks: list[Chunk] = []
    for doc in docs:
        chunks.extend(chunk_document(doc, cfg))
    return chunks


def save_chunks_jsonl(chunks: Iterable[Chunk], path: str | Path):
    with open(path, "w", encoding="utf-8") as fh:
        for chunk in chunks:
            row = {
                "chunk_id": chunk.chunk_id,
                "source_url": chunk.source_url,
                "text": chunk.text,
                "start_offset": chunk.start_offset,
                "end_offset": chunk.end_offset,
            }
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def load_chunks_jsonl(path: str | Path) -> list[Chunk]:
    chunks = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            chunks.append(Chunk(**row))
    return chunks
