"""Pipeline DSL: parsing, validation, serialization, canonical text, registry."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pipeline_pilot.errors import PipelineValidationError
from pipeline_pilot.pipeline import (
    StageKind,
    canonical_text,
    parse_pipeline,
    registry,
    serialize_pipeline,
)
from synthdata import FIVE_STAGE, estimator_pipeline, staged_pipeline


def test_single_stage_parse_fills_defaults():
    p = parse_pipeline(
        '{"stages":[{"kind":"estimator","primitive":"logistic_regression","params":{}}]}'
    )
    assert len(p.stages) == 1
    assert p.stages[0].params == {"learning_rate": 0.1, "epochs": 200, "l2": 0.0}


def test_ordering_violation_names_stage_index():
    doc = {
        "stages": [
            {"kind": "estimator", "primitive": "logistic_regression", "params": {}},
            {"kind": "preprocessor", "primitive": "mean_imputer", "params": {}},
        ]
    }
    with pytest.raises(PipelineValidationError, match="stage 1"):
        parse_pipeline(doc)


def test_unknown_primitive_is_rejected():
    doc = {"stages": [{"kind": "estimator", "primitive": "quantum_forest", "params": {}}]}
    with pytest.raises(PipelineValidationError, match="quantum_forest"):
        parse_pipeline(doc)


def test_kind_mismatch_is_rejected():
    doc = {"stages": [{"kind": "preprocessor", "primitive": "logistic_regression", "params": {}}]}
    with pytest.raises(PipelineValidationError, match="kind"):
        parse_pipeline(doc)


def test_param_out_of_range_names_stage():
    doc = {
        "stages": [
            {"kind": "estimator", "primitive": "knn_classifier", "params": {"k": 0}},
        ]
    }
    with pytest.raises(PipelineValidationError, match="stage 0"):
        parse_pipeline(doc)


def test_unknown_param_rejected():
    doc = {
        "stages": [{"kind": "estimator", "primitive": "knn_classifier", "params": {"kk": 1}}]
    }
    with pytest.raises(PipelineValidationError, match="kk"):
        parse_pipeline(doc)


def test_two_estimators_rejected():
    doc = {
        "stages": [
            {"kind": "estimator", "primitive": "knn_classifier", "params": {}},
            {"kind": "estimator", "primitive": "decision_tree", "params": {}},
        ]
    }
    with pytest.raises(PipelineValidationError, match="exactly one estimator"):
        parse_pipeline(doc)


def test_empty_pipeline_rejected():
    with pytest.raises(PipelineValidationError, match="at least one stage"):
        parse_pipeline({"stages": []})


def test_five_stage_round_trip_materializes_defaults():
    p = staged_pipeline(*FIVE_STAGE)
    text = serialize_pipeline(p)
    again = parse_pipeline(text)
    assert again == p
    obj = json.loads(text)
    logreg = obj["stages"][3]
    assert logreg["params"] == {"epochs": 200, "l2": 0.0, "learning_rate": 0.1}


def test_serialization_is_stable_across_runs():
    p = estimator_pipeline("decision_tree", max_depth=4)
    assert serialize_pipeline(p) == serialize_pipeline(p)
    assert serialize_pipeline(p) == serialize_pipeline(parse_pipeline(serialize_pipeline(p)))


def test_canonical_text_exact_single_stage():
    p = estimator_pipeline("logistic_regression", learning_rate=0.1)
    assert canonical_text(p) == [
        "logistic_regression(learning_rate=0.1, epochs=200, l2=0.0) — "
        "Binary/multiclass linear classifier trained by gradient descent."
    ]


def test_canonical_text_one_string_per_stage_in_order():
    p = staged_pipeline(
        ("preprocessor", "standard_scaler", {}),
        ("feature_selector", "select_k_best", {"k": 3}),
        ("estimator", "knn_classifier", {}),
    )
    texts = canonical_text(p)
    assert len(texts) == 3
    assert texts[0].startswith("standard_scaler()")
    assert texts[1].startswith("select_k_best(k=3)")
    assert texts[2].startswith("knn_classifier(k=5)")


def test_canonical_text_differs_only_in_changed_param():
    a = canonical_text(estimator_pipeline("knn_classifier", k=3))[0]
    b = canonical_text(estimator_pipeline("knn_classifier", k=7))[0]
    assert a != b
    assert a.replace("k=3", "k=7") == b


def test_registry_contains_expected_primitives():
    names = {d.name for d in registry()}
    assert "mean_imputer" in names
    kinds = {d.name: d.kind for d in registry()}
    assert kinds["mean_imputer"] == StageKind.preprocessor
    expected = {
        "mean_imputer",
        "standard_scaler",
        "min_max_scaler",
        "one_hot_encoder",
        "variance_threshold",
        "select_k_best",
        "logistic_regression",
        "decision_tree",
        "knn_classifier",
        "gaussian_naive_bayes",
        "identity_postprocessor",
    }
    assert names == expected
    assert len(registry()) == 11


def test_registry_defaults_validate_against_their_own_schema():
    for d in registry():
        for name, ps in d.param_schema.items():
            ps.check(ps.default)
        assert d.signature
        assert d.doc_header


def test_registry_order_is_stable():
    assert [d.name for d in registry()] == [d.name for d in registry()]


_PRIMITIVE_PARAMS = {
    "mean_imputer": {},
    "standard_scaler": {},
    "min_max_scaler": {},
    "one_hot_encoder": {},
    "variance_threshold": {"threshold": st.floats(0.0, 5.0)},
    "select_k_best": {"k": st.integers(1, 20)},
    "logistic_regression": {
        "learning_rate": st.floats(0.001, 1.0),
        "epochs": st.integers(1, 500),
        "l2": st.floats(0.0, 2.0),
    },
    "decision_tree": {"max_depth": st.integers(0, 12), "min_samples_leaf": st.integers(1, 5)},
    "knn_classifier": {"k": st.integers(1, 15)},
    "gaussian_naive_bayes": {},
    "identity_postprocessor": {},
}


def _stage_strategy(desc):
    params = _PRIMITIVE_PARAMS[desc.name]
    return st.fixed_dictionaries(params).map(
        lambda p: {"kind": desc.kind.name, "primitive": desc.name, "params": p}
    )


def _pipeline_documents():
    by_kind = {}
    for d in registry():
        by_kind.setdefault(d.kind, []).append(d)
    pre = st.lists(
        st.one_of([_stage_strategy(d) for d in by_kind[StageKind.preprocessor]]), max_size=2
    )
    sel = st.lists(
        st.one_of([_stage_strategy(d) for d in by_kind[StageKind.feature_selector]]), max_size=1
    )
    est = st.one_of([_stage_strategy(d) for d in by_kind[StageKind.estimator]]).map(lambda s: [s])
    post = st.lists(
        st.one_of([_stage_strategy(d) for d in by_kind[StageKind.postprocessor]]), max_size=1
    )
    return st.tuples(pre, sel, est, post).map(
        lambda parts: {"stages": [s for group in parts for s in group]}
    )


@settings(max_examples=60, deadline=None)
@given(_pipeline_documents())
def test_parse_serialize_round_trip_property(doc):
    p = parse_pipeline(doc)
    assert parse_pipeline(serialize_pipeline(p)) == p
    assert canonical_text(p) == canonical_text(parse_pipeline(serialize_pipeline(p)))
    kinds = [s.kind for s in p.stages]
    assert kinds == sorted(kinds)
    assert sum(1 for k in kinds if k == StageKind.estimator) == 1
