"""Text embeddings for dataset metadata and pipelines.

Two embedder flavours share one contract:

* :class:`HashedNGramEmbedder` - deterministic, dependency-free. Text is
  lowercased and split on non-alphanumerics; word unigrams, word bigrams, and
  character trigrams of the space-joined token stream are hashed with 64-bit
  FNV-1a into ``dim`` signed buckets, and the counts are L2-normalized. The
  all-zeros vector is reserved for empty token streams. Constants are fixed
  (see docs/formats.md) so vectors are identical across platforms.
* :class:`ExternalVectorStore` - precomputed vectors (e.g. exported from a
  pretrained sentence encoder) keyed by ``meta:<dataset id>`` and
  ``pipe:<dataset id>:<source>``. Lookups for absent keys are errors, never
  fallbacks.

Distances between embeddings are Euclidean.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, runtime_checkable

import numpy as np

from . import _kernels
from .corpus import CorpusRecord, DatasetMetadata
from .errors import DimensionMismatchError, VectorStoreError
from .pipeline import Pipeline, canonical_text

DEFAULT_DIM = 512

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


@dataclass(frozen=True)
class EmbeddingVector:
    """Fixed-dimension real vector; unit L2 norm unless it is the zero vector."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.values, dtype=np.float64)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        if arr.ndim != 1:
            raise ValueError("embedding values must be one-dimensional")
        if not np.isfinite(arr).all():
            raise ValueError("embedding values must be finite")

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    def norm(self) -> float:
        return float(math.sqrt(float(self.values @ self.values)))

    def is_zero(self) -> bool:
        return not self.values.any()


def distance(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Euclidean distance between two embeddings of equal dimension."""
    if a.dim != b.dim:
        raise DimensionMismatchError(f"dimension mismatch: {a.dim} vs {b.dim}")
    diff = a.values - b.values
    return float(math.sqrt(float(diff @ diff)))


@runtime_checkable
class Embedder(Protocol):
    """Deterministic text-to-vector map."""

    name: str
    dim: int

    def embed_text(self, text: str) -> EmbeddingVector: ...


def _feature_spans(text: str) -> tuple[bytes, np.ndarray, np.ndarray]:
    """Feature byte spans for one document.

    Returns a UTF-8 buffer plus (starts, ends) arrays; each span is one feature:
    a token, a token bigram (including its separating space), or a character
    trigram of the space-joined token stream.
    """
    tokens = _TOKEN_RE.findall(text.lower())
    if not tokens:
        return b"", np.empty(0, np.int64), np.empty(0, np.int64)
    doc = " ".join(tokens)
    if doc.isascii():
        buf = doc.encode("utf-8")
        lengths = np.array([len(t) for t in tokens], dtype=np.int64)
        tok_starts = np.zeros(len(tokens), dtype=np.int64)
        np.cumsum(lengths[:-1] + 1, out=tok_starts[1:])
        tok_ends = tok_starts + lengths
        spans_starts = [tok_starts, tok_starts[:-1]]
        spans_ends = [tok_ends, tok_ends[1:]]
        if len(buf) >= 3:
            tri = np.arange(len(buf) - 2, dtype=np.int64)
            spans_starts.append(tri)
            spans_ends.append(tri + 3)
        return buf, np.concatenate(spans_starts), np.concatenate(spans_ends)

    # Non-ASCII path: build each feature string explicitly so trigrams stay
    # character-level, then concatenate the UTF-8 encodings.
    features: list[bytes] = [t.encode("utf-8") for t in tokens]
    features.extend(f"{a} {b}".encode("utf-8") for a, b in zip(tokens, tokens[1:]))
    features.extend(doc[i : i + 3].encode("utf-8") for i in range(len(doc) - 2))
    ends = np.cumsum(np.array([len(f) for f in features], dtype=np.int64))
    starts = ends - np.array([len(f) for f in features], dtype=np.int64)
    return b"".join(features), starts, ends


class HashedNGramEmbedder:
    """Built-in deterministic embedder over hashed word and character n-grams."""

    def __init__(self, dim: int = DEFAULT_DIM):
        if dim < 1:
            raise ValueError(f"dim must be positive, got {dim}")
        self.dim = dim
        self.name = f"hashed-ngram-{dim}"

    def embed_text(self, text: str) -> EmbeddingVector:
        return EmbeddingVector(self.embed_texts([text])[0])

    def embed_texts(self, texts: Iterable[str]) -> np.ndarray:
        """Batch embedding; returns an (n, dim) matrix with unit (or zero) rows."""
        buffers: list[bytes] = []
        starts: list[np.ndarray] = []
        ends: list[np.ndarray] = []
        rows: list[np.ndarray] = []
        offset = 0
        n = 0
        for i, text in enumerate(texts):
            buf, s, e = _feature_spans(text)
            if s.size:
                buffers.append(buf)
                starts.append(s + offset)
                ends.append(e + offset)
                rows.append(np.full(s.size, i, dtype=np.int64))
                offset += len(buf)
            n = i + 1
        if not buffers:
            return np.zeros((n, self.dim), dtype=np.float64)
        data = np.frombuffer(b"".join(buffers), dtype=np.uint8)
        counts = _kernels.accumulate_features(
            data,
            np.concatenate(starts),
            np.concatenate(ends),
            np.concatenate(rows),
            n,
            self.dim,
        )
        norms = np.sqrt((counts * counts).sum(axis=1))
        nonzero = norms > 0.0
        counts[nonzero] /= norms[nonzero, None]
        return counts


class ExternalVectorStore:
    """Precomputed embedding vectors keyed by string; all of one dimension."""

    def __init__(self, vectors: dict[str, EmbeddingVector] | None = None, dim: int = 0):
        self._vectors: dict[str, EmbeddingVector] = {}
        self.dim = dim
        self.name = "external-store"
        if vectors:
            for key, vec in vectors.items():
                self.add(key, vec)

    def __len__(self) -> int:
        return len(self._vectors)

    def __contains__(self, key: str) -> bool:
        return key in self._vectors

    def keys(self):
        return self._vectors.keys()

    def add(self, key: str, vec: EmbeddingVector) -> None:
        if self.dim == 0:
            self.dim = vec.dim
        if vec.dim != self.dim:
            raise VectorStoreError(
                f"vector for {key!r} has dim {vec.dim}, store declares {self.dim}"
            )
        self._vectors[key] = vec

    def get(self, key: str) -> EmbeddingVector:
        try:
            return self._vectors[key]
        except KeyError:
            raise VectorStoreError(f"no vector stored for key {key!r}") from None

    def embed_text(self, text: str) -> EmbeddingVector:
        raise VectorStoreError(
            "an external vector store resolves known keys only; it cannot embed free text"
        )


def metadata_key(dataset_id: str) -> str:
    return f"meta:{dataset_id}"


def pipeline_key(dataset_id: str, source: str) -> str:
    return f"pipe:{dataset_id}:{source}"


def load_vectors(path: str | Path, dim: int | None = None) -> ExternalVectorStore:
    """Read a JSONL vector file (one {"key", "dim", "values"} object per line)."""
    path = Path(path)
    store = ExternalVectorStore(dim=dim or 0)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
                key = obj["key"]
                declared = int(obj["dim"])
                values = np.asarray(obj["values"], dtype=np.float64)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise VectorStoreError(f"line {lineno}: malformed vector entry: {exc}") from None
            if values.shape != (declared,):
                raise VectorStoreError(
                    f"line {lineno}: key {key!r} declares dim {declared} but has "
                    f"{values.shape[0]} values"
                )
            try:
                store.add(key, EmbeddingVector(values))
            except VectorStoreError as exc:
                raise VectorStoreError(f"line {lineno}: {exc}") from None
    return store


def save_vectors(store: ExternalVectorStore, path: str | Path) -> None:
    """Write a store back to the JSONL vector format (shortest round-trip reals)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for key in store.keys():
            vec = store.get(key)
            obj = {"key": key, "dim": vec.dim, "values": [float(v) for v in vec.values]}
            fh.write(json.dumps(obj, ensure_ascii=False))
            fh.write("\n")


def embed_metadata(m: DatasetMetadata, e: Embedder | ExternalVectorStore) -> EmbeddingVector:
    """Embedding of a dataset's metadata document."""
    if isinstance(e, ExternalVectorStore):
        return e.get(metadata_key(m.id))
    return e.embed_text(m.metadata_document())


def aggregate_stage_vectors(matrix: np.ndarray) -> np.ndarray:
    """Combine per-stage unit vectors: mean, then renormalize.

    Identical rows collapse to that row unchanged (the mean of copies of a
    unit vector is already unit), so single-stage and duplicated-stage
    pipelines embed exactly like the lone stage. The norm uses an
    exactly-rounded sum, keeping results independent of summation order so
    faithful reimplementations produce bit-identical vectors.
    """
    if matrix.shape[0] == 1 or all(
        np.array_equal(matrix[0], matrix[i]) for i in range(1, matrix.shape[0])
    ):
        return matrix[0].copy()
    mean = matrix.mean(axis=0)
    norm = math.sqrt(math.fsum(float(v) * float(v) for v in mean))
    if norm > 0.0:
        mean = mean / norm
    return mean


def embed_pipeline(p: Pipeline, e: Embedder) -> EmbeddingVector:
    """Embedding of a pipeline: mean of its stage-text embeddings, renormalized."""
    if isinstance(e, ExternalVectorStore):
        raise VectorStoreError(
            "pipeline embeddings in an external store are keyed by (dataset, source); "
            "use pipeline_vector instead"
        )
    texts = canonical_text(p)
    if hasattr(e, "embed_texts"):
        matrix = e.embed_texts(texts)
    else:
        matrix = np.stack([e.embed_text(t).values for t in texts])
    return EmbeddingVector(aggregate_stage_vectors(matrix))


def pipeline_vector(record: CorpusRecord, source: str, e: Embedder | ExternalVectorStore) -> EmbeddingVector:
    """Embedding of a record's pipeline for one source tag."""
    if isinstance(e, ExternalVectorStore):
        return e.get(pipeline_key(record.id, source))
    sourced = record.pipeline_for(source)
    if sourced is None:
        raise VectorStoreError(f"record {record.id!r} has no pipeline with source {source!r}")
    return embed_pipeline(sourced.pipeline, e)
