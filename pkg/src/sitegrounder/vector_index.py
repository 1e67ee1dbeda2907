"""Exact flat cosine-similarity index with binary persistence.

Vectors are stored as float32 rows in insertion order and scored by
float64 dot product against the query (cosine, since everything entering
the index is unit-norm). Search scans all rows: exact by construction,
and fast enough for corpus scales of tens of thousands of chunks.

File format (little-endian throughout): magic ``VIDX``, version u32 = 1,
dim u32, count u64, then per entry a u32-length-prefixed UTF-8 chunk id,
a u32-length-prefixed UTF-8 JSON metadata blob, and dim float32 values.
"""

from __future__ import annotations

import json
import os
import struct
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, BinaryIO

import numpy as np

from .embedding import EmbeddingVector
from .errors import CorruptIndex, DimensionMismatch, DuplicateId

_MAGIC = b"VIDX"
_VERSION = 1


@dataclass(frozen=True)
class SearchHit:
    chunk_id: str
    score: float
    metadata: dict[str, Any]


class VectorIndex:
    """Append-only exact nearest-neighbor index over unit vectors.

    Thread contract: any number of concurrent searches, or one writer;
    ``add`` and ``search`` never interleave mid-entry.
    """

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self._ids: list[str] = []
        self._metadata: list[dict[str, Any]] = []
        self._rows: list[np.ndarray] = []
        self._by_id: dict[str, int] = {}
        self._matrix: np.ndarray | None = None  # float64 cache, rebuilt after adds
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, chunk_id: str) -> bool:
        return chunk_id in self._by_id

    def add(self, chunk_id: str, vector: EmbeddingVector, metadata: dict[str, Any] | None = None):
        if vector.dim != self.dim:
            raise DimensionMismatch(f"vector dim {vector.dim} != index dim {self.dim}")
        with self._lock:
            if chunk_id in self._by_id:
                raise DuplicateId(chunk_id)
            self._by_id[chunk_id] = len(self._ids)
            self._ids.append(chunk_id)
            self._metadata.append(dict(metadata or {}))
            self._rows.append(vector.as_array())
            self._matrix = None

    def get(self, chunk_id: str) -> tuple[EmbeddingVector, dict[str, Any]]:
        pos = self._by_id.get(chunk_id)
        if pos is None:
            raise KeyError(chunk_id)
        return EmbeddingVector.from_array(self._rows[pos]), dict(self._metadata[pos])

    def _scores_matrix(self) -> np.ndarray:
        with self._lock:
            if self._matrix is None:
                self._matrix = np.stack(self._rows).astype(np.float64) if self._rows else np.zeros((0, self.dim))
            return self._matrix

    def search(self, query: EmbeddingVector, k: int) -> list[SearchHit]:
        """Top-``k`` entries by descending dot product; ties keep insertion order."""
        if query.dim != self.dim:
            raise DimensionMismatch(f"query dim {query.dim} != index dim {self.dim}")
        if k < 1:
            raise ValueError("k must be >= 1")
        if not self._ids:
            return []
        scores = self._scores_matrix() @ np.asarray(query.values, dtype=np.float64)
        order = np.argsort(-scores, kind="stable")[:k]
        return [SearchHit(self._ids[i], float(scores[i]), dict(self._metadata[i])) for i in order]

    def save(self, path: str | Path):
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        with open(tmp, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<I", _VERSION))
            fh.write(struct.pack("<I", self.dim))
            fh.write(struct.pack("<Q", len(self._ids)))
            for chunk_id, metadata, row in zip(self._ids, self._metadata, self._rows):
                id_bytes = chunk_id.encode("utf-8")
                meta_bytes = json.dumps(metadata, ensure_ascii=False, sort_keys=True).encode("utf-8")
                fh.write(struct.pack("<I", len(id_bytes)))
                fh.write(id_bytes)
                fh.write(struct.pack("<I", len(meta_bytes)))
                fh.write(meta_bytes)
                fh.write(row.astype("<f4").tobytes())
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str | Path) -> "VectorIndex":
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != _MAGIC:
                raise CorruptIndex(f"bad magic {magic!r}")
            version = _read_u32(fh)
            if version != _VERSION:
                raise CorruptIndex(f"unsupported version {version}")
            dim = _read_u32(fh)
            if dim < 1:
                raise CorruptIndex(f"invalid dim {dim}")
            count = _read_u64(fh)
            index = cls(dim)
            for _ in range(count):
                chunk_id = _read_block(fh).decode("utf-8")
                try:
                    metadata = json.loads(_read_block(fh).decode("utf-8"))
                except ValueError as exc:
                    raise CorruptIndex(f"bad metadata JSON for {chunk_id!r}") from exc
                vec_bytes = fh.read(4 * dim)
                if len(vec_bytes) != 4 * dim:
                    raise CorruptIndex("truncated vector data")
                row = np.frombuffer(vec_bytes, dtype="<f4").copy()
                try:
                    index.add(chunk_id, EmbeddingVector.from_array(row), metadata)
                except DuplicateId as exc:
                    raise CorruptIndex(f"duplicate chunk id {chunk_id!r}") from exc
            if fh.read(1):
                raise CorruptIndex("trailing bytes after last entry")
        return index


def _read_exact(fh: BinaryIO, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise CorruptIndex(f"truncated file: wanted {n} bytes, got {len(data)}")
    return data


def _read_u32(fh: BinaryIO) -> int:
    return struct.unpack("<I", _read_exact(fh, 4))[0]


def _read_u64(fh: BinaryIO) -> int:
    return struct.unpack("<Q", _read_exact(fh, 8))[0]


def _read_block(fh: BinaryIO) -> bytes:
    return _read_exact(fh, _read_u32(fh))
