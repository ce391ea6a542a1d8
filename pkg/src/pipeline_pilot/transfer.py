"""Zero-shot pipeline transfer by nearest neighbor over embeddings.

The basic recommender embeds the query's metadata, finds the closest corpus
dataset by exact linear scan, and returns that dataset's human pipeline. The
representation-based variant concatenates the metadata embedding with pipeline
embeddings from a chosen set of sources (canonical order H, O, S, A, G) and
scans in the concatenated space; with no sources requested it degenerates to
the metadata-only scan.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import _kernels
from .corpus import CANONICAL_SOURCE_ORDER, Corpus, CorpusRecord, DatasetMetadata, EvaluationRecord
from .embed import Embedder, EmbeddingVector, ExternalVectorStore, embed_metadata, pipeline_vector
from .engine import KFold, Protocol, evaluate
from .errors import PipelinePilotError
from .pipeline import Pipeline
from .tabular import load_csv


@dataclass(frozen=True)
class Representation:
    """Concatenated embedding view of one dataset."""

    dataset_id: str
    metadata_vec: EmbeddingVector
    pipeline_vecs: tuple[tuple[str, EmbeddingVector], ...]
    concat: np.ndarray
    sources: tuple[str, ...]  # inclusion mask, in canonical order


@dataclass(frozen=True)
class TransferRecommendation:
    """A donor pipeline proposed for a query dataset."""

    query_id: str
    donor_id: str
    pipeline: Pipeline
    distance: float
    elapsed_ms: int

    def to_obj(self) -> dict:
        from .pipeline import pipeline_to_obj

        return {
            "query_id": self.query_id,
            "donor_id": self.donor_id,
            "pipeline": pipeline_to_obj(self.pipeline),
            "distance": self.distance,
            "elapsed_ms": self.elapsed_ms,
        }


def canonical_sources(sources) -> tuple[str, ...]:
    """Normalize a source set to the canonical concatenation order."""
    requested = set(sources)
    unknown = requested - set(CANONICAL_SOURCE_ORDER)
    if unknown:
        raise PipelinePilotError(f"unknown source tag(s) {sorted(unknown)}")
    return tuple(s for s in CANONICAL_SOURCE_ORDER if s in requested)


def build_representation(
    record: CorpusRecord, e: Embedder | ExternalVectorStore, sources=()
) -> Representation:
    """Metadata embedding concatenated with the record's source-tagged pipelines."""
    order = canonical_sources(sources)
    meta = embed_metadata(record.metadata, e)
    vecs = []
    for s in order:
        if not isinstance(e, ExternalVectorStore) and record.pipeline_for(s) is None:
            raise PipelinePilotError(f"record {record.id!r} has no pipeline for source {s!r}")
        vecs.append((s, pipeline_vector(record, s, e)))
    parts = [meta.values] + [v.values for _, v in vecs]
    return Representation(record.id, meta, tuple(vecs), np.concatenate(parts), order)


def nearest_dataset(
    query: EmbeddingVector | np.ndarray,
    corpus_embeddings: Mapping[str, EmbeddingVector] | Mapping[str, np.ndarray],
    exclude: str | None = None,
) -> tuple[str, float]:
    """Exact nearest neighbor by full scan; ties break to the smallest id."""
    q = query.values if isinstance(query, EmbeddingVector) else np.asarray(query, dtype=np.float64)
    ids = sorted(k for k in corpus_embeddings.keys() if k != exclude)
    if not ids:
        raise PipelinePilotError("no eligible candidates for nearest-neighbor scan")
    rows = []
    for i in ids:
        v = corpus_embeddings[i]
        rows.append(v.values if isinstance(v, EmbeddingVector) else np.asarray(v, dtype=np.float64))
    matrix = np.stack(rows)
    if matrix.shape[1] != q.shape[0]:
        raise PipelinePilotError(
            f"query dimension {q.shape[0]} does not match candidates ({matrix.shape[1]})"
        )
    idx, sq = _kernels.nearest_index(matrix, q)
    return ids[idx], math.sqrt(sq)


def _query_representation(
    query: CorpusRecord | DatasetMetadata, e, order: tuple[str, ...]
) -> tuple[str, np.ndarray]:
    if isinstance(query, CorpusRecord):
        rep = build_representation(query, e, order)
        return query.id, rep.concat
    if order:
        raise PipelinePilotError(
            "a bare-metadata query has no pipelines; representation sources require a corpus record"
        )
    return query.id, embed_metadata(query, e).values


def recommend_direct(
    query: CorpusRecord | DatasetMetadata,
    corpus: Corpus,
    e: Embedder | ExternalVectorStore,
    sources=(),
) -> TransferRecommendation:
    """Nearest donor under the chosen representation; returns its human pipeline.

    A corpus member querying itself is excluded from the candidates
    (leave-one-out semantics).
    """
    started = time.perf_counter()
    order = canonical_sources(sources)
    query_id, query_concat = _query_representation(query, e, order)

    donors = corpus.donors(order, exclude=query_id)
    if not donors:
        raise PipelinePilotError("corpus has no eligible donors with a human pipeline")
    donors = sorted(donors, key=lambda r: r.id)

    if not order and not isinstance(e, ExternalVectorStore) and hasattr(e, "embed_texts"):
        # Metadata-only scan: batch-embed every donor document in one kernel call.
        matrix = e.embed_texts([r.metadata.metadata_document() for r in donors])
    else:
        matrix = np.stack([build_representation(r, e, order).concat for r in donors])

    idx, sq = _kernels.nearest_index(matrix, query_concat)
    donor = donors[idx]
    elapsed_ms = int((time.perf_counter() - started) * 1000)
    return TransferRecommendation(
        query_id=query_id,
        donor_id=donor.id,
        pipeline=donor.human_pipeline().pipeline,
        distance=math.sqrt(sq),
        elapsed_ms=elapsed_ms,
    )


def transfer_and_evaluate(
    query: CorpusRecord,
    corpus: Corpus,
    e: Embedder | ExternalVectorStore,
    sources=(),
    protocol: Protocol | str = KFold(5),
    seed: int | None = None,
) -> EvaluationRecord:
    """Recommend a donor pipeline for the query and score it on the query's data."""
    recommendation = recommend_direct(query, corpus, e, sources)
    data_path = corpus.resolve_data_path(query)
    dataset = load_csv(data_path, query.task.target_column, query.task.task_type)
    record = evaluate(
        recommendation.pipeline,
        dataset,
        query.task,
        protocol=protocol,
        seed=seed,
        dataset_id=query.id,
    )
    return EvaluationRecord(
        dataset_id=record.dataset_id,
        pipeline_origin=(recommendation.donor_id, "H"),
        score=record.score,
        metric=record.metric,
        wall_time_ms=record.wall_time_ms,
        error=record.error,
    )
