"""Command-line surface.

Subcommands: ``validate`` (check a pipeline document), ``run`` (score a
pipeline on a CSV), ``recommend`` (propose a pipeline for a dataset), and
``benchmark`` (leave-one-out transfer over a corpus). Exit codes: 0 success,
1 validation error, 2 execution error, 3 I/O error. ``PIPELINE_PILOT_LOG``
sets the log level.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import embed, engine, metricnet, transfer
from .corpus import Corpus, CorpusRecord, DatasetMetadata, TaskSpec, load_corpus
from .errors import (
    PipelinePilotError,
    PipelineValidationError,
    SchemaMismatchError,
    StageExecutionError,
    VectorStoreError,
)
from .pipeline import parse_pipeline
from .tabular import load_csv

log = logging.getLogger("pipeline_pilot")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_EXECUTION = 2
EXIT_IO = 3


def _setup_logging() -> None:
    level = os.environ.get("PIPELINE_PILOT_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))


def _load_embedder(spec: str):
    if spec == "builtin":
        return embed.HashedNGramEmbedder()
    if spec.startswith("external:"):
        return embed.load_vectors(spec.split(":", 1)[1])
    raise PipelinePilotError(f"unknown embedder {spec!r}; expected builtin or external:<path>")


def _parse_sources(text: str) -> tuple[str, ...]:
    if not text:
        return ()
    return transfer.canonical_sources(s.strip() for s in text.split(",") if s.strip())


def _dump(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True)


def _print_table(rows: list[dict], columns: list[str]) -> None:
    widths = {c: max(len(c), *(len(str(r.get(c, ""))) for r in rows)) if rows else len(c) for c in columns}
    header = "  ".join(c.ljust(widths[c]) for c in columns)
    print(header)
    print("-" * len(header))
    for r in rows:
        print("  ".join(str(r.get(c, "")).ljust(widths[c]) for c in columns))


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        text = Path(args.pipeline).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        parse_pipeline(text)
    except PipelineValidationError as exc:
        print(f"invalid pipeline: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    print(f"{args.pipeline}: valid")
    return EXIT_OK


def _task_from_args(args: argparse.Namespace) -> TaskSpec:
    metric = "accuracy" if args.task_type == "classification" else "rmse"
    return TaskSpec(
        task_type=args.task_type,
        target_column=args.target,
        metric=metric,
        split_seed=args.seed,
        test_fraction=args.test_fraction,
    )


def cmd_run(args: argparse.Namespace) -> int:
    try:
        text = Path(args.pipeline).read_text(encoding="utf-8")
        pipeline = parse_pipeline(text)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except PipelineValidationError as exc:
        print(f"invalid pipeline: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        task = _task_from_args(args)
        dataset = load_csv(args.data, args.target, task.task_type)
    except (PipelinePilotError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    record = engine.evaluate(
        pipeline,
        dataset,
        task,
        protocol=args.protocol,
        seed=args.seed,
        dataset_id=Path(args.data).stem,
    )
    # Timing is nondeterministic; keep default output reproducible.
    obj = record.to_obj(include_wall_time=args.timings)
    if args.out:
        Path(args.out).write_text(_dump(record.to_obj(include_wall_time=True)) + "\n", encoding="utf-8")
    if args.format == "json":
        print(_dump(obj))
    else:
        _print_table([{k: obj.get(k) for k in ("dataset_id", "metric", "score", "error")}],
                     ["dataset_id", "metric", "score", "error"])
    if record.failed:
        print(f"execution failed: {record.error}", file=sys.stderr)
        return EXIT_EXECUTION
    return EXIT_OK


def _query_from_args(args: argparse.Namespace, corpus: Corpus) -> CorpusRecord | DatasetMetadata:
    if args.id:
        return corpus.get(args.id)
    obj = json.loads(Path(args.metadata).read_text(encoding="utf-8"))
    return DatasetMetadata(
        id=obj["id"],
        title=obj.get("title", ""),
        subtitle=obj.get("subtitle", ""),
        description=obj.get("description", ""),
        keywords=tuple(obj.get("keywords", ())),
        data_path=obj.get("data_path"),
    )


def cmd_recommend(args: argparse.Namespace) -> int:
    try:
        corpus = load_corpus(args.corpus)
        embedder = _load_embedder(args.embedder)
        sources = _parse_sources(args.sources)
        query = _query_from_args(args, corpus)
    except (PipelinePilotError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    try:
        if args.mode == "direct":
            rec = transfer.recommend_direct(query, corpus, embedder, sources)
        else:
            if not isinstance(query, CorpusRecord):
                print("error: learned mode requires --id (a corpus record query)", file=sys.stderr)
                return EXIT_VALIDATION
            if args.checkpoint:
                net = metricnet.load_network(args.checkpoint)
            else:
                config = metricnet.TrainConfig(
                    epochs=args.train_epochs,
                    seed=args.seed,
                    target_mode=args.target_mode,
                )
                net = metricnet.train(corpus, embedder, sources, exclude=query.id, config=config)
                if args.save_checkpoint:
                    metricnet.save_network(net, args.save_checkpoint)
            rec = metricnet.recommend_learned(query, corpus, net, embedder, sources)
    except (VectorStoreError, PipelinePilotError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EXECUTION

    obj = rec.to_obj()
    if args.format == "json":
        print(_dump(obj))
    else:
        _print_table(
            [{k: obj[k] for k in ("query_id", "donor_id", "distance", "elapsed_ms")}],
            ["query_id", "donor_id", "distance", "elapsed_ms"],
        )
    return EXIT_OK


def cmd_benchmark(args: argparse.Namespace) -> int:
    try:
        corpus = load_corpus(args.corpus)
        embedder = _load_embedder(args.embedder)
        sources = _parse_sources(args.sources)
        modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    except (PipelinePilotError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    for m in modes:
        if m not in ("direct", "learned"):
            print(f"error: unknown mode {m!r}", file=sys.stderr)
            return EXIT_VALIDATION

    rows = []
    for record in corpus:
        row: dict = {"dataset_id": record.id}
        try:
            dataset = load_csv(
                corpus.resolve_data_path(record),
                record.task.target_column,
                record.task.task_type,
            )
            human = record.human_pipeline()
            if human is None:
                raise PipelinePilotError(f"record {record.id!r} has no human pipeline")
            own = engine.evaluate(
                human.pipeline, dataset, record.task,
                protocol=args.protocol, seed=args.seed, dataset_id=record.id,
            )
            row["human"] = own.score
            if own.failed:
                row["error"] = own.error
            if "direct" in modes:
                ev = transfer.transfer_and_evaluate(
                    record, corpus, embedder, (), protocol=args.protocol, seed=args.seed
                )
                row["direct"] = ev.score
                row["direct_donor"] = ev.pipeline_origin[0]
                if ev.failed:
                    row["error"] = ev.error
                if sources:
                    ev = transfer.transfer_and_evaluate(
                        record, corpus, embedder, sources, protocol=args.protocol, seed=args.seed
                    )
                    row["pipeline_embedding"] = ev.score
                    row["pipeline_embedding_donor"] = ev.pipeline_origin[0]
                    if ev.failed:
                        row["error"] = ev.error
            if "learned" in modes:
                config = metricnet.TrainConfig(
                    epochs=args.train_epochs, seed=args.seed, target_mode=args.target_mode
                )
                net = metricnet.train(corpus, embedder, sources, exclude=record.id, config=config)
                rec = metricnet.recommend_learned(record, corpus, net, embedder, sources)
                donor_pipeline = rec.pipeline
                ev = engine.evaluate(
                    donor_pipeline, dataset, record.task,
                    protocol=args.protocol, seed=args.seed, dataset_id=record.id,
                )
                row["learned"] = ev.score
                row["learned_donor"] = rec.donor_id
                if ev.failed:
                    row["error"] = ev.error
        except (PipelinePilotError, OSError) as exc:
            row["error"] = str(exc)
        rows.append(row)

    score_columns = [c for c in ("human", "direct", "pipeline_embedding", "learned")
                     if any(r.get(c) is not None for r in rows)]
    means = {
        c: sum(r[c] for r in rows if r.get(c) is not None)
        / max(1, sum(1 for r in rows if r.get(c) is not None))
        for c in score_columns
    }
    artifact = {
        "protocol": args.protocol,
        "seed": args.seed,
        "sources": list(sources),
        "modes": modes,
        "rows": rows,
        "means": means,
    }
    if args.out:
        Path(args.out).write_text(_dump(artifact) + "\n", encoding="utf-8")
    if args.format == "json":
        print(_dump(artifact))
    else:
        _print_table(rows, ["dataset_id"] + score_columns + ["error"])
        print()
        _print_table([means], score_columns)
    failed = [r for r in rows if r.get("error")]
    if failed and all(r.get("error") for r in rows):
        return EXIT_EXECUTION
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pipeline-pilot",
        description="Zero-shot AutoML: recommend, validate, and execute ML pipelines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="validate a pipeline JSON document")
    p_validate.add_argument("pipeline", help="path to the pipeline JSON file")
    p_validate.set_defaults(func=cmd_validate)

    p_run = sub.add_parser("run", help="fit and score a pipeline on a CSV dataset")
    p_run.add_argument("--pipeline", required=True)
    p_run.add_argument("--data", required=True, help="CSV file with a header row")
    p_run.add_argument("--target", required=True, help="target column name")
    p_run.add_argument("--task-type", choices=("classification", "regression"),
                       default="classification", dest="task_type")
    p_run.add_argument("--protocol", default="kfold:5", help="holdout or kfold:<k>")
    p_run.add_argument("--test-fraction", type=float, default=0.25, dest="test_fraction")
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--timings", action="store_true", help="include wall_time_ms in output")
    p_run.add_argument("--out", help="also write the full evaluation record to this file")
    p_run.add_argument("--format", choices=("table", "json"), default="json")
    p_run.set_defaults(func=cmd_run)

    p_rec = sub.add_parser("recommend", help="recommend a pipeline for a dataset")
    p_rec.add_argument("--corpus", required=True)
    query = p_rec.add_mutually_exclusive_group(required=True)
    query.add_argument("--metadata", help="JSON file with dataset metadata")
    query.add_argument("--id", help="dataset id of a corpus record (leave-one-out)")
    p_rec.add_argument("--mode", choices=("direct", "learned"), default="direct")
    p_rec.add_argument("--sources", default="", help="comma-separated source tags (H,O,S,A,G)")
    p_rec.add_argument("--embedder", default="builtin", help="builtin or external:<vector file>")
    p_rec.add_argument("--seed", type=int, default=0)
    p_rec.add_argument("--checkpoint", help="load a trained metric network")
    p_rec.add_argument("--save-checkpoint", dest="save_checkpoint")
    p_rec.add_argument("--train-epochs", type=int, default=1200, dest="train_epochs")
    p_rec.add_argument("--target-mode", choices=metricnet.TARGET_MODES,
                       default="pipeline_distance", dest="target_mode")
    p_rec.add_argument("--format", choices=("table", "json"), default="json")
    p_rec.set_defaults(func=cmd_recommend)

    p_bench = sub.add_parser("benchmark", help="leave-one-out transfer benchmark over a corpus")
    p_bench.add_argument("--corpus", required=True)
    p_bench.add_argument("--modes", default="direct", help="comma-separated: direct,learned")
    p_bench.add_argument("--sources", default="")
    p_bench.add_argument("--embedder", default="builtin")
    p_bench.add_argument("--protocol", default="kfold:5")
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--train-epochs", type=int, default=1200, dest="train_epochs")
    p_bench.add_argument("--target-mode", choices=metricnet.TARGET_MODES,
                         default="pipeline_distance", dest="target_mode")
    p_bench.add_argument("--out", help="write the JSON artifact to this file")
    p_bench.add_argument("--format", choices=("table", "json"), default="table")
    p_bench.set_defaults(func=cmd_benchmark)
    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StageExecutionError as exc:
        print(f"execution error: {exc}", file=sys.stderr)
        return EXIT_EXECUTION
    except SchemaMismatchError as exc:
        print(f"execution error: {exc}", file=sys.stderr)
        return EXIT_EXECUTION
    except PipelineValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except PipelinePilotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EXECUTION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
