"""Meta-dataset persistence: dataset metadata, tasks, solution pipelines.

A corpus is an ordered list of records, one per (dataset, task) pair. Each
record carries free-text metadata, the learning task, and up to five solution
pipelines tagged by origin (O, S, A, G for the recorded AutoML systems, H for
the human solution). Recorded evaluations project onto a sparse performance
tensor keyed by dataset and per-kind primitive slots.

Storage is JSON Lines, UTF-8, one record per line; see docs/formats.md.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator

from .errors import CorpusFormatError, DuplicateDatasetIdError, PipelinePilotError
from .pipeline import Pipeline, StageKind, pipeline_from_obj, pipeline_to_obj

SOURCE_TAGS = ("O", "S", "A", "G", "H")
# Canonical source order used when concatenating pipeline embeddings.
CANONICAL_SOURCE_ORDER = ("H", "O", "S", "A", "G")

TASK_TYPES = ("classification", "regression")
METRICS = ("accuracy", "rmse")
_METRIC_FOR_TASK = {"classification": "accuracy", "regression": "rmse"}

# Reserved tensor-slot token for stage kinds a pipeline does not use.
NONE_SLOT = "none"


@dataclass(frozen=True)
class DatasetMetadata:
    """Free-text identity of a dataset."""

    id: str
    title: str
    subtitle: str = ""
    description: str = ""
    keywords: tuple[str, ...] = ()
    data_path: str | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("dataset id must be nonempty")
        object.__setattr__(self, "keywords", tuple(self.keywords))

    def metadata_document(self) -> str:
        """Title, subtitle, description, and keywords joined by single spaces.

        Empty parts are skipped so the document never carries doubled spaces.
        """
        parts = [self.title, self.subtitle, self.description, *self.keywords]
        return " ".join(p for p in parts if p)


@dataclass(frozen=True)
class TaskSpec:
    """What to predict and how to score it."""

    task_type: str
    target_column: str
    metric: str
    split_seed: int
    test_fraction: float

    def __post_init__(self):
        if self.task_type not in TASK_TYPES:
            raise ValueError(f"task_type must be one of {TASK_TYPES}, got {self.task_type!r}")
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}, got {self.metric!r}")
        if _METRIC_FOR_TASK[self.task_type] != self.metric:
            raise ValueError(f"task_type {self.task_type!r} pairs with {_METRIC_FOR_TASK[self.task_type]!r}, got {self.metric!r}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError(f"test_fraction must lie in (0, 1), got {self.test_fraction}")


@dataclass(frozen=True)
class SourcedPipeline:
    """A solution pipeline tagged with its origin."""

    pipeline: Pipeline
    source: str
    recorded_score: float | None = None

    def __post_init__(self):
        if self.source not in SOURCE_TAGS:
            raise ValueError(f"source must be one of {SOURCE_TAGS}, got {self.source!r}")


@dataclass(frozen=True)
class CorpusRecord:
    """One (dataset, task) pair with its known solution pipelines."""

    metadata: DatasetMetadata
    task: TaskSpec
    pipelines: tuple[SourcedPipeline, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "pipelines", tuple(self.pipelines))
        seen = set()
        for sp in self.pipelines:
            if sp.source in seen:
                raise ValueError(f"record {self.metadata.id!r} has two pipelines with source {sp.source!r}")
            seen.add(sp.source)

    @property
    def id(self) -> str:
        return self.metadata.id

    def pipeline_for(self, source: str) -> SourcedPipeline | None:
        for sp in self.pipelines:
            if sp.source == source:
                return sp
        return None

    def human_pipeline(self) -> SourcedPipeline | None:
        return self.pipeline_for("H")


@dataclass(frozen=True)
class EvaluationRecord:
    """Outcome of running one pipeline on one dataset.

    ``pipeline_origin`` is either the string "literal" (the pipeline was given
    directly; it is then carried in ``pipeline``) or a (donor dataset id,
    source tag) pair naming a corpus entry. Exactly one of ``score`` and
    ``error`` is set.
    """

    dataset_id: str
    pipeline_origin: str | tuple[str, str]
    score: float | None
    metric: str
    wall_time_ms: int
    error: str | None = None
    pipeline: Pipeline | None = None

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")
        if (self.score is None) == (self.error is None):
            raise ValueError("exactly one of score and error must be set")
        if self.score is not None and self.metric == "accuracy" and not 0.0 <= self.score <= 1.0:
            raise ValueError(f"accuracy must lie in [0, 1], got {self.score}")
        if self.score is not None and self.metric == "rmse" and self.score < 0.0:
            raise ValueError(f"rmse must be nonnegative, got {self.score}")
        if self.wall_time_ms < 0:
            raise ValueError("wall_time_ms must be nonnegative")
        if isinstance(self.pipeline_origin, list):
            object.__setattr__(self, "pipeline_origin", tuple(self.pipeline_origin))

    @property
    def failed(self) -> bool:
        return self.error is not None

    def to_obj(self, include_wall_time: bool = True) -> dict:
        origin: Any
        if self.pipeline_origin == "literal":
            origin = "literal"
        else:
            donor, source = self.pipeline_origin
            origin = {"donor_id": donor, "source": source}
        obj: dict[str, Any] = {
            "dataset_id": self.dataset_id,
            "pipeline_origin": origin,
            "score": self.score,
            "metric": self.metric,
            "error": self.error,
        }
        if include_wall_time:
            obj["wall_time_ms"] = self.wall_time_ms
        if self.pipeline is not None:
            obj["pipeline"] = pipeline_to_obj(self.pipeline)
        return obj


class Corpus:
    """Immutable ordered collection of corpus records with an id index."""

    def __init__(self, records: list[CorpusRecord] | tuple[CorpusRecord, ...] = (), base_dir: Path | None = None):
        self._records = tuple(records)
        self.base_dir = base_dir
        self._by_id: dict[str, CorpusRecord] = {}
        for r in self._records:
            if r.id in self._by_id:
                raise DuplicateDatasetIdError(f"duplicate dataset id {r.id!r}")
            self._by_id[r.id] = r

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[CorpusRecord]:
        return iter(self._records)

    def __getitem__(self, i: int) -> CorpusRecord:
        return self._records[i]

    def __eq__(self, other) -> bool:
        return isinstance(other, Corpus) and self._records == other._records

    @property
    def records(self) -> tuple[CorpusRecord, ...]:
        return self._records

    def get(self, dataset_id: str) -> CorpusRecord:
        try:
            return self._by_id[dataset_id]
        except KeyError:
            raise PipelinePilotError(f"unknown dataset id {dataset_id!r}") from None

    def has(self, dataset_id: str) -> bool:
        return dataset_id in self._by_id

    def donors(self, sources: tuple[str, ...] = (), exclude: str | None = None) -> list[CorpusRecord]:
        """Records usable as transfer donors: an H pipeline plus every requested source."""
        needed = set(sources) | {"H"}
        out = []
        for r in self._records:
            if r.id == exclude:
                continue
            if all(r.pipeline_for(s) is not None for s in needed):
                out.append(r)
        return out

    def resolve_data_path(self, record: CorpusRecord) -> Path:
        if record.metadata.data_path is None:
            raise PipelinePilotError(f"record {record.id!r} has no local data")
        p = Path(record.metadata.data_path)
        if not p.is_absolute() and self.base_dir is not None:
            p = self.base_dir / p
        return p


def _record_to_obj(record: CorpusRecord) -> dict:
    return {
        "id": record.metadata.id,
        "title": record.metadata.title,
        "subtitle": record.metadata.subtitle,
        "description": record.metadata.description,
        "keywords": list(record.metadata.keywords),
        "data_path": record.metadata.data_path,
        "task": {
            "task_type": record.task.task_type,
            "target_column": record.task.target_column,
            "metric": record.task.metric,
            "split_seed": record.task.split_seed,
            "test_fraction": record.task.test_fraction,
        },
        "pipelines": [
            {
                "source": sp.source,
                "recorded_score": sp.recorded_score,
                "pipeline": pipeline_to_obj(sp.pipeline),
            }
            for sp in record.pipelines
        ],
    }


def _record_from_obj(obj: Any, line: int) -> CorpusRecord:
    if not isinstance(obj, dict):
        raise CorpusFormatError("record must be a JSON object", line)
    try:
        metadata = DatasetMetadata(
            id=obj["id"],
            title=obj.get("title", ""),
            subtitle=obj.get("subtitle", ""),
            description=obj.get("description", ""),
            keywords=tuple(obj.get("keywords", ())),
            data_path=obj.get("data_path"),
        )
        task_obj = obj["task"]
        task = TaskSpec(
            task_type=task_obj["task_type"],
            target_column=task_obj["target_column"],
            metric=task_obj["metric"],
            split_seed=int(task_obj["split_seed"]),
            test_fraction=float(task_obj["test_fraction"]),
        )
        pipelines = tuple(
            SourcedPipeline(
                pipeline=pipeline_from_obj(sp["pipeline"]),
                source=sp["source"],
                recorded_score=sp.get("recorded_score"),
            )
            for sp in obj.get("pipelines", ())
        )
        return CorpusRecord(metadata, task, pipelines)
    except CorpusFormatError:
        raise
    except (KeyError, TypeError, ValueError, PipelinePilotError) as exc:
        raise CorpusFormatError(str(exc), line) from None


def load_corpus(path: str | Path) -> Corpus:
    """Read a JSONL corpus file; rejects malformed lines and duplicate ids."""
    path = Path(path)
    records: list[CorpusRecord] = []
    first_line: dict[str, int] = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"invalid JSON: {exc.msg}", lineno) from None
            record = _record_from_obj(obj, lineno)
            if record.id in first_line:
                raise DuplicateDatasetIdError(
                    f"duplicate dataset id {record.id!r} on line {lineno} "
                    f"(first seen on line {first_line[record.id]})"
                )
            first_line[record.id] = lineno
            records.append(record)
    return Corpus(records, base_dir=path.parent)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write the corpus as canonical JSONL; load_corpus(save_corpus(c)) == c."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for record in corpus:
            fh.write(json.dumps(_record_to_obj(record), ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def _stage_slots(pipeline: Pipeline) -> tuple[str, str, str, str, str]:
    """Fixed-arity primitive slots, one per stage kind; multiples joined by '+'."""
    by_kind = pipeline.primitives_by_kind()
    return tuple(
        "+".join(by_kind[k]) if by_kind[k] else NONE_SLOT for k in StageKind
    )  # type: ignore[return-value]


def tensor_view(
    corpus: Corpus, evaluations: list[EvaluationRecord]
) -> dict[tuple[str, str, str, str, str, str], float]:
    """Sparse performance tensor: (dataset, per-kind primitive slots) -> score.

    Duplicate keys resolve latest-wins with a warning. Failed evaluations are
    skipped (they have no score to record).
    """
    out: dict[tuple[str, str, str, str, str, str], float] = {}
    for ev in evaluations:
        if not corpus.has(ev.dataset_id):
            raise PipelinePilotError(f"evaluation references unknown dataset id {ev.dataset_id!r}")
        if ev.failed:
            continue
        if ev.pipeline_origin == "literal":
            if ev.pipeline is None:
                raise PipelinePilotError(
                    f"literal evaluation for {ev.dataset_id!r} carries no pipeline"
                )
            pipeline = ev.pipeline
        else:
            donor_id, source = ev.pipeline_origin
            sourced = corpus.get(donor_id).pipeline_for(source)
            if sourced is None:
                raise PipelinePilotError(
                    f"donor {donor_id!r} has no pipeline with source {source!r}"
                )
            pipeline = sourced.pipeline
        key = (ev.dataset_id, *_stage_slots(pipeline))
        if key in out:
            warnings.warn(
                f"duplicate tensor entry for {key}; keeping the latest score",
                stacklevel=2,
            )
        out[key] = ev.score  # type: ignore[assignment]
    return out
