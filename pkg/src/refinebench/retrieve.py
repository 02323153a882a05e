"""Dense retrieval: embedders, an exact cosine top-K index, Recall@K."""

from __future__ import annotations

import hashlib
import json
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import httpx
import numpy as np

from .errors import DegenerateInput, DimMismatch, EmbedderError, MissingField, ServiceError
from .http import post_json
from .raster import load_image
from .tools.locator import encode_png_b64

PARADIGMS = ("i2t_dense", "caption_then_retrieve", "i2i", "composed")


@dataclass
class CorpusEntry:
    doc_id: str
    title: str
    text: str
    image: Path | None = None


def load_corpus(path) -> list[CorpusEntry]:
    path = Path(path)
    out = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            d = json.loads(line)
            img = d.get("image")
            out.append(CorpusEntry(str(d["doc_id"]), d.get("title", ""), d.get("text", ""),
                                   path.parent / img if img else None))
    return out


class Embedder(Protocol):
    name: str
    dim: int

    def embed_image(self, image: np.ndarray) -> np.ndarray: ...

    def embed_text(self, text: str) -> np.ndarray: ...


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    if not np.isfinite(n) or n < 1e-12:
        raise DegenerateInput("embedding is all zero")
    return v / n


class FingerprintEmbedder:
    """Deterministic 64-d stand-in for a learned embedder.

    Images: 8x8 area-averaged luminance thumbnail, mean-centred.
    Text: signed hashed bag of lower-cased word tokens.
    """

    name = "fingerprint"
    dim = 64
    side = 8

    def embed_image(self, image: np.ndarray) -> np.ndarray:
        gray = image.astype(np.float64) @ np.array([0.299, 0.587, 0.114])
        h, w = gray.shape
        rows = np.arange(self.side) * h // self.side
        cols = np.arange(self.side) * w // self.side
        if h < self.side or w < self.side:
            # too small to bin: sample nearest pixels instead
            thumb = gray[np.ix_(rows, cols)]
        else:
            sums = np.add.reduceat(np.add.reduceat(gray, rows, axis=0), cols, axis=1)
            counts = np.outer(np.diff(np.append(rows, h)), np.diff(np.append(cols, w)))
            thumb = sums / counts
        v = thumb.ravel()
        return _unit(v - v.mean())

    def embed_text(self, text: str) -> np.ndarray:
        v = np.zeros(self.dim)
        for tok in re.findall(r"\w+", text.lower()):
            h = int.from_bytes(hashlib.blake2b(tok.encode("utf-8"), digest_size=8).digest(), "little")
            v[h % self.dim] += 1.0 if (h >> 32) & 1 else -1.0
        return _unit(v)


def fingerprint_embedder() -> FingerprintEmbedder:
    return FingerprintEmbedder()


class RemoteEmbedder:
    """HTTP embedding service: POST ``{"kind": "text"|"image", "payload": ...}``
    and expect ``{"vector": [...]}``. Images travel as base64 PNG."""

    def __init__(self, endpoint: str, name: str = "remote", dim: int | None = None,
                 api_key_env: str | None = None, timeout: float = 30.0, attempts: int = 3,
                 backoff: float = 0.5, client: httpx.Client | None = None):
        self.endpoint = endpoint
        self.name = name
        self.dim = dim
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.attempts = attempts
        self.backoff = backoff
        self.client = client or httpx.Client(timeout=timeout)

    def _embed(self, kind: str, payload: str) -> np.ndarray:
        headers = {}
        if self.api_key_env and os.environ.get(self.api_key_env):
            headers["Authorization"] = f"Bearer {os.environ[self.api_key_env]}"
        body = post_json(self.client, self.endpoint, {"kind": kind, "payload": payload},
                         headers=headers, attempts=self.attempts, backoff=self.backoff)
        try:
            vec = np.asarray(body["vector"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise ServiceError(f"malformed embedding response: {str(body)[:200]}") from exc
        if vec.ndim != 1 or not np.isfinite(vec).all():
            raise EmbedderError("embedding must be a finite 1-d vector")
        if self.dim is None:
            self.dim = len(vec)
        return vec

    def embed_image(self, image):
        return self._embed("image", encode_png_b64(image))

    def embed_text(self, text):
        return self._embed("text", text)


def remote_embedder(endpoint: str, **kwargs) -> RemoteEmbedder:
    return RemoteEmbedder(endpoint, **kwargs)


def safe_unit(vec_fn, dim: int) -> np.ndarray:
    """Normalised embedding; degenerate inputs map to the first basis vector."""
    try:
        v = np.asarray(vec_fn(), dtype=np.float64)
        return _unit(v)
    except DegenerateInput:
        e = np.zeros(dim)
        e[0] = 1.0
        return e


@dataclass
class Index:
    matrix: np.ndarray  # (N, D), unit rows
    doc_ids: list[str]
    paradigm: str
    entries: dict  # doc_id -> CorpusEntry

    def __post_init__(self):
        # position of each row in ascending doc_id order, the tiebreak for equal scores
        self.id_rank = np.argsort(np.argsort(np.array(self.doc_ids, dtype=object)))

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self):
        return len(self.doc_ids)


def _entry_text(e: CorpusEntry) -> str:
    return f"{e.title} {e.text}"


def build_index(corpus, embedder, paradigm: str) -> Index:
    if paradigm not in PARADIGMS:
        raise ValueError(f"unknown paradigm {paradigm!r}")
    corpus = list(corpus)
    if not corpus:
        raise MissingField("corpus is empty")
    seen = set()
    for e in corpus:
        if e.doc_id in seen:
            raise MissingField(f"duplicate doc_id {e.doc_id!r}")
        seen.add(e.doc_id)
        if paradigm in ("i2i", "composed") and e.image is None:
            raise MissingField(f"{paradigm} index needs an image for {e.doc_id!r}")

    def raw(fn):
        try:
            return np.asarray(fn(), dtype=np.float64)
        except DegenerateInput:
            return None

    rows = []
    dim = None
    for e in corpus:
        parts = []
        if paradigm in ("i2i", "composed"):
            img = load_image(e.image)
            parts.append(raw(lambda: embedder.embed_image(img)))
        if paradigm in ("i2t_dense", "caption_then_retrieve", "composed"):
            parts.append(raw(lambda: embedder.embed_text(_entry_text(e))))
        for p in parts:
            if p is None:
                continue
            if dim is None:
                dim = len(p)
            elif len(p) != dim:
                raise DimMismatch(f"{e.doc_id}: embedding has {len(p)} dims, expected {dim}")
        rows.append(parts)
    if dim is None:
        dim = getattr(embedder, "dim", None) or 1

    matrix = np.empty((len(rows), dim))
    for i, parts in enumerate(rows):
        units = [safe_unit(lambda p=p: p if p is not None else np.zeros(dim), dim) for p in parts]
        matrix[i] = safe_unit(lambda: np.mean(units, axis=0), dim)
    doc_ids = [e.doc_id for e in corpus]
    return Index(matrix, doc_ids, paradigm, {e.doc_id: e for e in corpus})


def search_topk(index: Index, query_vec, k: int) -> list[tuple[str, float]]:
    q = np.asarray(query_vec, dtype=np.float64)
    if q.shape != (index.dim,):
        raise DimMismatch(f"query has shape {q.shape}, index dim is {index.dim}")
    q = safe_unit(lambda: q, index.dim)
    scores = index.matrix @ q
    order = np.lexsort((index.id_rank, -scores))
    return [(index.doc_ids[i], float(scores[i])) for i in order[:max(0, k)]]


def embed_query(index: Index, embedder, image=None, text: str | None = None) -> np.ndarray:
    """Query-side embedding for the index's paradigm.

    For caption_then_retrieve the caller passes the caption as ``text``.
    """
    dim = index.dim
    if index.paradigm in ("i2t_dense", "i2i"):
        return safe_unit(lambda: embedder.embed_image(image), dim)
    if index.paradigm == "caption_then_retrieve":
        return safe_unit(lambda: embedder.embed_text(text or ""), dim)
    parts = [safe_unit(lambda: embedder.embed_image(image), dim)]
    if text:
        parts.append(safe_unit(lambda: embedder.embed_text(text), dim))
    return safe_unit(lambda: np.mean(parts, axis=0), dim)


def recall_at_k(results, golden_doc_ids, k: int) -> int:
    golden = set(golden_doc_ids)
    return int(any(doc_id in golden for doc_id, *_ in list(results)[:k]))
