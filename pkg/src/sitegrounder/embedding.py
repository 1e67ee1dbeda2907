"""Text-to-vector clients: a deterministic offline stub and a remote HTTP client.

The stub is a signed hash projection: tokens are FNV-1a-hashed into
``dim`` buckets with a ±1 sign taken from the hash's top bit, then the
bucket counts are L2-normalized. It is cheap, order-insensitive over the
token multiset, and reimplementable in a few lines for cross-checking.

The remote client speaks a minimal JSON protocol shared by common
inference servers: POST ``{"model": ..., "inputs": [...]}`` and read back
``{"vectors": [[...], ...]}``. Vectors are re-normalized client-side so
index invariants never depend on the server.
"""

from __future__ import annotations

import os
import re
import threading
from dataclasses import dataclass
from typing import Protocol, Sequence

import httpx
import numpy as np

from .errors import DimensionMismatch, RemoteUnavailable

ENV_EMBED_URL = "SITEGROUNDER_EMBED_URL"

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs (ASCII alnum tokens)."""
    return _TOKEN_RE.findall(text.lower())


def fnv1a_64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


@dataclass(frozen=True)
class EmbeddingVector:
    """A unit-norm (or all-zero) vector of 32-bit float values."""

    values: tuple[float, ...]
    dim: int

    def __post_init__(self):
        if len(self.values) != self.dim:
            raise DimensionMismatch(f"vector has {len(self.values)} values, dim says {self.dim}")

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "EmbeddingVector":
        arr32 = np.asarray(arr, dtype=np.float32)
        return cls(values=tuple(float(x) for x in arr32), dim=arr32.shape[0])

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float32)

    def norm(self) -> float:
        return float(np.linalg.norm(np.asarray(self.values, dtype=np.float64)))


@dataclass(frozen=True)
class EmbedderProfile:
    """Which embedder produced (or will produce) a set of vectors."""

    kind: str  # "stub" | "remote"
    model_id: str = "stub-fnv64"
    dim: int = 64
    endpoint_url: str = ""

    def __post_init__(self):
        if self.kind not in ("stub", "remote"):
            raise ValueError(f"unknown embedder kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")


def stub_embed(text: str, dim: int) -> EmbeddingVector:
    """Deterministic signed-hash embedding of ``text`` into ``dim`` buckets.

    Empty or token-free text maps to the all-zero vector; everything else
    comes out unit-norm.
    """
    if dim < 8:
        raise ValueError("stub embedding dim must be >= 8")
    acc = np.zeros(dim, dtype=np.float64)
    for token in tokenize(text):
        h = fnv1a_64(token.encode("utf-8"))
        sign = 1.0 if (h >> 63) == 0 else -1.0
        acc[h % dim] += sign
    norm = float(np.linalg.norm(acc))
    if norm > 0.0:
        acc /= norm
    return EmbeddingVector.from_array(acc)


class Embedder(Protocol):
    dim: int

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]: ...


class StubEmbedder:
    """Offline embedder; pure function of the input text."""

    def __init__(self, dim: int = 64):
        self.dim = dim

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        return [stub_embed(text, self.dim) for text in texts]


class RemoteEmbedder:
    """HTTP client for a remote embedding endpoint.

    Requests are chunked into ``batch_size`` inputs and at most
    ``max_inflight`` requests run concurrently across threads.
    """

    def __init__(self, profile: EmbedderProfile, client: httpx.Client | None = None,
                 batch_size: int = 32, max_inflight: int = 2, timeout_s: float = 30.0):
        endpoint = profile.endpoint_url or os.environ.get(ENV_EMBED_URL, "")
        if not endpoint:
            raise ValueError(f"remote embedder needs endpoint_url or ${ENV_EMBED_URL}")
        self.profile = profile
        self.dim = profile.dim
        self.endpoint_url = endpoint
        self._client = client or httpx.Client(timeout=timeout_s)
        self._batch_size = batch_size
        self._gate = threading.Semaphore(max_inflight)

    def _post(self, texts: Sequence[str]) -> list[list[float]]:
        payload = {"model": self.profile.model_id, "inputs": list(texts)}
        with self._gate:
            try:
                resp = self._client.post(self.endpoint_url, json=payload)
            except httpx.HTTPError as exc:
                raise RemoteUnavailable(f"{self.endpoint_url}: {exc}") from exc
        if resp.status_code != 200:
            raise RemoteUnavailable(f"{self.endpoint_url}: HTTP {resp.status_code}")
        try:
            vectors = resp.json()["vectors"]
        except (ValueError, KeyError) as exc:
            raise RemoteUnavailable(f"{self.endpoint_url}: malformed response") from exc
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise RemoteUnavailable(
                f"{self.endpoint_url}: expected {len(texts)} vectors, got "
                f"{len(vectors) if isinstance(vectors, list) else type(vectors).__name__}"
            )
        return vectors

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        out: list[EmbeddingVector] = []
        for i in range(0, len(texts), self._batch_size):
            for raw in self._post(texts[i:i + self._batch_size]):
                arr = np.asarray(raw, dtype=np.float64)
                if arr.ndim != 1 or arr.shape[0] != self.dim:
                    raise DimensionMismatch(
                        f"remote returned a length-{arr.shape[0] if arr.ndim == 1 else '?'} vector, expected {self.dim}"
                    )
                norm = float(np.linalg.norm(arr))
                if norm > 0.0:
                    arr = arr / norm
                out.append(EmbeddingVector.from_array(arr))
        return out

    def close(self):
        self._client.close()


def make_embedder(profile: EmbedderProfile, client: httpx.Client | None = None) -> Embedder:
    if profile.kind == "stub":
        return StubEmbedder(dim=profile.dim)
    return RemoteEmbedder(profile, client=client)


def embed_batch(texts: Sequence[str], profile: EmbedderProfile) -> list[EmbeddingVector]:
    """One-shot batch embedding under ``profile`` (order-preserving)."""
    return make_embedder(profile).embed_batch(list(texts))
