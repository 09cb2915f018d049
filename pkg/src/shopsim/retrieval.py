"""Embedding and top-k cosine retrieval over category-restricted indices.

Two embedders live behind one interface: a deterministic offline hashing
embedder (used by every test) and a remote embedding-API client. Indices are
immutable after build, so concurrent queries are safe. Nearest-neighbor
search is an exhaustive scan; the inventories are small.
"""

from __future__ import annotations

import hashlib
import re
import time
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .catalog import Catalog, Product
from .errors import TransportError

__all__ = [
    "Embedder",
    "HashingEmbedder",
    "RemoteEmbedder",
    "DocumentIndex",
    "RetrievalResult",
    "build_index",
    "build_product_index",
    "build_guide_index",
    "product_document",
    "query_top_k",
]

_TOKEN = re.compile(r"[a-z0-9]+")


class Embedder(Protocol):
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


def _check_text(text: str) -> None:
    if not text:
        raise ValueError("cannot embed empty text")


class HashingEmbedder:
    """Deterministic fallback embedder.

    Lowercase tokens are hashed into a fixed-width sparse count vector which
    is then L2-normalized. Identical text always yields identical vectors,
    on every platform.
    """

    def __init__(self, dim: int = 1024) -> None:
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim

    def _slot(self, token: str) -> int:
        digest = hashlib.md5(token.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "big") % self.dim

    def embed(self, text: str) -> np.ndarray:
        _check_text(text)
        vec = np.zeros(self.dim, dtype=np.float64)
        for token in _TOKEN.findall(text.lower()):
            vec[self._slot(token)] += 1.0
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        return vec


class RemoteEmbedder:
    """Client for an HTTP embedding endpoint speaking the de-facto
    ``{"model": ..., "input": [...]}`` convention."""

    def __init__(self, endpoint: str, model_id: str, dim: int,
                 max_retries: int = 2, timeout: float = 30.0,
                 backoff: float = 0.5) -> None:
        self.endpoint = endpoint
        self.model_id = model_id
        self.dim = dim
        self.max_retries = max_retries
        self.timeout = timeout
        self.backoff = backoff

    def embed(self, text: str) -> np.ndarray:
        import requests

        _check_text(text)
        last_exc: Exception | None = None
        for attempt in range(self.max_retries + 1):
            try:
                resp = requests.post(
                    self.endpoint,
                    json={"model": self.model_id, "input": [text]},
                    timeout=self.timeout,
                )
                if resp.status_code >= 500:
                    raise TransportError(f"embedding server error {resp.status_code}")
                resp.raise_for_status()
                values = resp.json()["data"][0]["embedding"]
                vec = np.asarray(values, dtype=np.float64)
                if vec.shape != (self.dim,):
                    raise TransportError(
                        f"embedding dim mismatch: got {vec.shape}, want ({self.dim},)")
                return vec
            except Exception as exc:  # requests raises its own hierarchy
                last_exc = exc
                if attempt < self.max_retries:
                    time.sleep(self.backoff * (2 ** attempt))
        raise TransportError(f"embedding request failed: {last_exc}")


@dataclass(frozen=True)
class RetrievalResult:
    ranked: tuple[tuple[str, float], ...]

    def doc_ids(self) -> list[str]:
        return [doc_id for doc_id, _ in self.ranked]


@dataclass(frozen=True)
class DocumentIndex:
    category: str
    kind: str  # "products" | "buying_guides"
    doc_ids: tuple[str, ...]
    texts: tuple[str, ...]
    matrix: np.ndarray  # shape (n, dim); rows already unit-length (or zero)

    def __len__(self) -> int:
        return len(self.doc_ids)


def build_index(entries: Sequence[tuple[str, str]], category: str, kind: str,
                embedder: Embedder) -> DocumentIndex:
    doc_ids = tuple(doc_id for doc_id, _ in entries)
    if len(set(doc_ids)) != len(doc_ids):
        raise ValueError("doc ids must be unique within an index")
    texts = tuple(text for _, text in entries)
    if any(not t for t in texts):
        raise ValueError("every indexed document needs non-empty text")
    if entries:
        matrix = np.stack([embedder.embed(t) for t in texts])
        if not np.all(np.isfinite(matrix)):
            raise ValueError("index vectors must be finite")
    else:
        matrix = np.zeros((0, embedder.dim), dtype=np.float64)
    return DocumentIndex(category=category, kind=kind, doc_ids=doc_ids,
                         texts=texts, matrix=matrix)


def product_document(product: Product) -> str:
    """Indexed text for a product: name, description, and features."""
    return "\n".join([product.name, product.description, *product.features])


def build_product_index(catalog: Catalog, category: str, embedder: Embedder) -> DocumentIndex:
    entries = [(p.name, product_document(p)) for p in catalog.products(category)]
    return build_index(entries, category, "products", embedder)


def build_guide_index(catalog: Catalog, category: str, embedder: Embedder) -> DocumentIndex:
    entries = [(f"guide-{i}", text) for i, text in enumerate(catalog.guides(category))]
    return build_index(entries, category, "buying_guides", embedder)


def query_top_k(index: DocumentIndex, query: str, k: int = 4,
                embedder: Embedder | None = None) -> RetrievalResult:
    """Rank the index by cosine similarity to the query.

    Returns min(k, |index|) entries, scores non-increasing, ties broken by
    insertion order. An empty index yields an empty result.
    """
    if k < 1:
        raise ValueError("k must be positive")
    if len(index) == 0:
        return RetrievalResult(ranked=())
    if embedder is None:
        raise ValueError("an embedder is required for non-empty indices")
    q = embedder.embed(query)
    norm = np.linalg.norm(q)
    if norm > 0:
        q = q / norm
    scores = index.matrix @ q
    order = np.argsort(-scores, kind="stable")[:k]
    return RetrievalResult(
        ranked=tuple((index.doc_ids[i], float(scores[i])) for i in order))
