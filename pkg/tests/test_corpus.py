"""Corpus persistence, validation, and the sparse performance tensor."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pipeline_pilot.corpus import (
    Corpus,
    CorpusRecord,
    DatasetMetadata,
    DuplicateDatasetIdError,
    EvaluationRecord,
    SourcedPipeline,
    TaskSpec,
    load_corpus,
    save_corpus,
    tensor_view,
)
from pipeline_pilot.errors import CorpusFormatError, PipelinePilotError
from synthdata import estimator_pipeline, make_record, staged_pipeline


def test_empty_file_gives_empty_corpus(tmp_path):
    path = tmp_path / "corpus.jsonl"
    path.write_text("", encoding="utf-8")
    corpus = load_corpus(path)
    assert len(corpus) == 0


def test_empty_corpus_round_trips_to_empty_file(tmp_path):
    path = tmp_path / "corpus.jsonl"
    save_corpus(Corpus([]), path)
    assert path.read_text(encoding="utf-8") == ""
    assert len(load_corpus(path)) == 0


def test_single_record_round_trips_bit_identically(tmp_path):
    record = make_record("iris", title="iris flowers", keywords=("flowers", "classic"))
    first = tmp_path / "first.jsonl"
    save_corpus(Corpus([record]), first)
    loaded = load_corpus(first)
    assert len(loaded) == 1
    second = tmp_path / "second.jsonl"
    save_corpus(loaded, second)
    assert first.read_bytes() == second.read_bytes()


def test_duplicate_id_error_cites_both_lines(tmp_path):
    records = [make_record(f"ds-{i}") for i in range(7)]
    path = tmp_path / "corpus.jsonl"
    save_corpus(Corpus(records), path)
    lines = path.read_text(encoding="utf-8").splitlines()
    lines[6] = lines[2]  # line 7 duplicates line 3
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    with pytest.raises(DuplicateDatasetIdError) as excinfo:
        load_corpus(path)
    message = str(excinfo.value)
    assert "line 7" in message and "line 3" in message


def test_malformed_line_names_line_number(tmp_path):
    path = tmp_path / "corpus.jsonl"
    save_corpus(Corpus([make_record("ok")]), path)
    with path.open("a", encoding="utf-8") as fh:
        fh.write("{not json\n")
    with pytest.raises(CorpusFormatError) as excinfo:
        load_corpus(path)
    assert "line 2" in str(excinfo.value)


def test_unicode_description_round_trips(tmp_path):
    record = make_record("uni", description="ナイーブベイズ naïve Καλημέρα données ❄")
    path = tmp_path / "corpus.jsonl"
    save_corpus(Corpus([record]), path)
    assert load_corpus(path).records == (record,)


def test_ten_random_records_round_trip(tmp_path):
    pipelines = (
        SourcedPipeline(estimator_pipeline("decision_tree", max_depth=3), "H", 0.91),
        SourcedPipeline(estimator_pipeline("knn_classifier", k=3), "G"),
    )
    records = [
        make_record(
            f"ds-{i}",
            title=f"dataset number {i}",
            subtitle="" if i % 2 else "a subtitle",
            description=f"rows about topic {i}",
            keywords=(f"kw{i}", "shared"),
            data_path=None if i % 3 else f"data/{i}.csv",
            pipelines=pipelines,
            split_seed=i,
        )
        for i in range(10)
    ]
    path = tmp_path / "corpus.jsonl"
    save_corpus(Corpus(records), path)
    assert load_corpus(path).records == tuple(records)


corpus_records = st.builds(
    make_record,
    dataset_id=st.uuids().map(str),
    title=st.text(max_size=30),
    subtitle=st.text(max_size=20),
    description=st.text(max_size=60),
    keywords=st.lists(st.text(min_size=1, max_size=8), max_size=4).map(tuple),
    split_seed=st.integers(0, 1000),
)


@settings(max_examples=25, deadline=None)
@given(st.lists(corpus_records, max_size=6, unique_by=lambda r: r.id))
def test_round_trip_property(tmp_path_factory, records):
    path = tmp_path_factory.mktemp("prop") / "corpus.jsonl"
    save_corpus(Corpus(records), path)
    loaded = load_corpus(path)
    assert loaded.records == tuple(records)
    assert len({r.id for r in loaded}) == len(loaded.records)


def test_metadata_document_is_deterministic_and_ordered():
    m = DatasetMetadata("x", "Title", "Sub", "Desc here", ("k1", "k2"))
    assert m.metadata_document() == "Title Sub Desc here k1 k2"
    assert m.metadata_document() == m.metadata_document()
    empty_subtitle = DatasetMetadata("x", "Title", "", "Desc", ("k",))
    assert empty_subtitle.metadata_document() == "Title Desc k"


def test_record_rejects_duplicate_sources():
    p = estimator_pipeline("gaussian_naive_bayes")
    with pytest.raises(ValueError, match="two pipelines"):
        CorpusRecord(
            DatasetMetadata("d", "t"),
            TaskSpec("classification", "y", "accuracy", 0, 0.2),
            (SourcedPipeline(p, "H"), SourcedPipeline(p, "H")),
        )


def test_task_spec_validation():
    with pytest.raises(ValueError):
        TaskSpec("classification", "y", "rmse", 0, 0.2)
    with pytest.raises(ValueError):
        TaskSpec("regression", "y", "accuracy", 0, 0.2)
    with pytest.raises(ValueError):
        TaskSpec("classification", "y", "accuracy", 0, 1.0)


# ---------------------------------------------------------------------------
# tensor view


def _evaluation(dataset_id, origin, score=0.8, pipeline=None):
    return EvaluationRecord(
        dataset_id=dataset_id,
        pipeline_origin=origin,
        score=score,
        metric="accuracy",
        wall_time_ms=1,
        pipeline=pipeline,
    )


def test_tensor_view_empty():
    corpus = Corpus([make_record("a")])
    assert tensor_view(corpus, []) == {}


def test_tensor_view_two_stage_pipeline_fills_unused_slots_with_none():
    two_stage = staged_pipeline(
        ("preprocessor", "standard_scaler", {}),
        ("estimator", "knn_classifier", {}),
    )
    record = make_record("a", pipelines=(SourcedPipeline(two_stage, "H"),))
    corpus = Corpus([record])
    view = tensor_view(corpus, [_evaluation("a", ("a", "H"))])
    assert view == {("a", "standard_scaler", "none", "none", "knn_classifier", "none"): 0.8}


def test_tensor_view_duplicate_key_latest_wins_with_warning():
    record = make_record("a")
    other = make_record(
        "b", pipelines=(SourcedPipeline(estimator_pipeline("decision_tree"), "H"),)
    )
    corpus = Corpus([record, other])
    evaluations = [
        _evaluation("a", ("a", "H"), score=0.1),
        _evaluation("b", ("b", "H"), score=0.5),
        _evaluation("a", ("a", "H"), score=0.9),  # duplicates the first key
        _evaluation("b", ("a", "H"), score=0.2),
        _evaluation("a", ("b", "H"), score=0.4),
    ]
    with pytest.warns(UserWarning, match="duplicate tensor entry"):
        view = tensor_view(corpus, evaluations)
    assert len(view) == 4
    assert view[("a", "none", "none", "none", "gaussian_naive_bayes", "none")] == 0.9


def test_tensor_view_rejects_unknown_dataset():
    corpus = Corpus([make_record("a")])
    with pytest.raises(PipelinePilotError, match="unknown dataset id"):
        tensor_view(corpus, [_evaluation("ghost", ("a", "H"))])


def test_tensor_view_literal_origin_uses_carried_pipeline():
    record = make_record("a")
    corpus = Corpus([record])
    pipeline = estimator_pipeline("decision_tree")
    view = tensor_view(corpus, [_evaluation("a", "literal", pipeline=pipeline)])
    assert list(view) == [("a", "none", "none", "none", "decision_tree", "none")]


def test_evaluation_record_validation():
    with pytest.raises(ValueError):
        _evaluation("a", "literal", score=1.5)
    with pytest.raises(ValueError):
        EvaluationRecord("a", "literal", None, "accuracy", 1, error=None)
    failure = EvaluationRecord("a", "literal", None, "accuracy", 1, error="stage 0 blew up")
    assert failure.failed


def test_corpus_serialization_is_canonical_json(tmp_path):
    path = tmp_path / "corpus.jsonl"
    save_corpus(Corpus([make_record("z", title="zed")]), path)
    line = path.read_text(encoding="utf-8").splitlines()[0]
    obj = json.loads(line)
    assert list(obj) == sorted(obj)
