"""Pipeline DSL: data model, primitive registry, parser, and serializer.

A pipeline is an ordered chain of typed stages. Stage kinds follow a fixed
progression (preprocessors first, then feature extractors, feature selectors,
exactly one estimator, and finally postprocessors). Each stage names a
primitive from the built-in registry and carries a validated parameter map.

``canonical_text`` renders one string per stage (the call with its actual
parameter values plus a one-sentence doc header); those strings are what the
text embedders consume.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Any, Mapping

from .errors import PipelineValidationError


class StageKind(enum.IntEnum):
    """The five stage roles, in required chain order."""

    preprocessor = 0
    feature_extractor = 1
    feature_selector = 2
    estimator = 3
    postprocessor = 4

    def __str__(self) -> str:  # serialize as the bare name
        return self.name


@dataclass(frozen=True)
class ParamSpec:
    """Schema for one primitive parameter."""

    type: str  # "real" | "int" | "str" | "bool"
    default: Any
    low: float | None = None
    high: float | None = None
    choices: tuple[str, ...] | None = None

    def check(self, value: Any) -> None:
        if self.type == "real":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise TypeError(f"expected a real number, got {value!r}")
            if self.low is not None and value < self.low:
                raise ValueError(f"{value!r} below minimum {self.low}")
            if self.high is not None and value > self.high:
                raise ValueError(f"{value!r} above maximum {self.high}")
        elif self.type == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                raise TypeError(f"expected an integer, got {value!r}")
            if self.low is not None and value < self.low:
                raise ValueError(f"{value!r} below minimum {int(self.low)}")
            if self.high is not None and value > self.high:
                raise ValueError(f"{value!r} above maximum {int(self.high)}")
        elif self.type == "str":
            if not isinstance(value, str):
                raise TypeError(f"expected a string, got {value!r}")
            if self.choices is not None and value not in self.choices:
                raise ValueError(f"{value!r} not one of {list(self.choices)}")
        elif self.type == "bool":
            if not isinstance(value, bool):
                raise TypeError(f"expected a boolean, got {value!r}")
        else:  # pragma: no cover - registry is static
            raise AssertionError(f"unknown param type {self.type}")

    def coerce(self, value: Any) -> Any:
        """Normalize ints passed for real params to float."""
        if self.type == "real" and isinstance(value, int) and not isinstance(value, bool):
            return float(value)
        return value


@dataclass(frozen=True)
class PrimitiveDescriptor:
    """Registry entry: behaviour contract and embedding text of a primitive."""

    name: str
    kind: StageKind
    doc_header: str
    param_schema: Mapping[str, ParamSpec] = field(default_factory=dict)

    @property
    def signature(self) -> str:
        """Canonical call string with default parameter values."""
        return self.call_string({name: ps.default for name, ps in self.param_schema.items()})

    def call_string(self, params: Mapping[str, Any]) -> str:
        parts = [f"{name}={params[name]!r}" for name in self.param_schema]
        return f"{self.name}({', '.join(parts)})"


@dataclass(frozen=True)
class StageSpec:
    """One validated pipeline stage."""

    kind: StageKind
    primitive: str
    params: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class Pipeline:
    """Ordered, validated chain of stages."""

    stages: tuple[StageSpec, ...]

    @property
    def estimator_index(self) -> int:
        return next(i for i, s in enumerate(self.stages) if s.kind == StageKind.estimator)

    def primitives_by_kind(self) -> dict[StageKind, list[str]]:
        out: dict[StageKind, list[str]] = {k: [] for k in StageKind}
        for s in self.stages:
            out[s.kind].append(s.primitive)
        return out


def _build_registry() -> dict[str, PrimitiveDescriptor]:
    real = lambda default, low=None, high=None: ParamSpec("real", default, low, high)
    integer = lambda default, low=None, high=None: ParamSpec("int", default, low, high)

    descriptors = [
        PrimitiveDescriptor(
            "mean_imputer",
            StageKind.preprocessor,
            "Fills missing numeric cells with the column's training mean and "
            "missing categorical cells with its training mode.",
        ),
        PrimitiveDescriptor(
            "standard_scaler",
            StageKind.preprocessor,
            "Centers each numeric column to zero mean and unit variance; "
            "zero-variance columns map to zero.",
        ),
        PrimitiveDescriptor(
            "min_max_scaler",
            StageKind.preprocessor,
            "Rescales each numeric column to the [0, 1] training range; "
            "degenerate ranges map to zero.",
        ),
        PrimitiveDescriptor(
            "one_hot_encoder",
            StageKind.preprocessor,
            "Expands each categorical column into indicator columns from the "
            "training category table; unseen categories encode as all zeros.",
        ),
        PrimitiveDescriptor(
            "variance_threshold",
            StageKind.feature_selector,
            "Drops numeric columns whose training variance is at or below the "
            "threshold.",
            {"threshold": real(0.0, low=0.0)},
        ),
        PrimitiveDescriptor(
            "select_k_best",
            StageKind.feature_selector,
            "Keeps the k columns most correlated (absolute Pearson) with a "
            "numeric encoding of the target, breaking ties by column order.",
            {"k": integer(10, low=1)},
        ),
        PrimitiveDescriptor(
            "logistic_regression",
            StageKind.estimator,
            "Binary/multiclass linear classifier trained by gradient descent.",
            {
                "learning_rate": real(0.1, low=1e-9, high=1e3),
                "epochs": integer(200, low=1, high=10_000_000),
                "l2": real(0.0, low=0.0),
            },
        ),
        PrimitiveDescriptor(
            "decision_tree",
            StageKind.estimator,
            "Classification tree grown on Gini impurity with binary numeric "
            "threshold and categorical equality splits.",
            {
                "max_depth": integer(0, low=0, high=1_000_000),  # 0 = unbounded
                "min_samples_leaf": integer(1, low=1),
            },
        ),
        PrimitiveDescriptor(
            "knn_classifier",
            StageKind.estimator,
            "Majority vote over the k nearest training rows under Euclidean "
            "distance on numeric columns plus Hamming distance on categorical ones.",
            {"k": integer(5, low=1)},
        ),
        PrimitiveDescriptor(
            "gaussian_naive_bayes",
            StageKind.estimator,
            "Naive Bayes with per-class Gaussians on numeric columns and "
            "Laplace-smoothed frequencies on categorical ones.",
        ),
        PrimitiveDescriptor(
            "identity_postprocessor",
            StageKind.postprocessor,
            "Passes predictions through unchanged.",
        ),
    ]
    return {d.name: d for d in descriptors}


_REGISTRY = _build_registry()


def registry() -> list[PrimitiveDescriptor]:
    """All built-in primitives, in stable registration order."""
    return list(_REGISTRY.values())


def descriptor(name: str) -> PrimitiveDescriptor:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise PipelineValidationError(f"unknown primitive {name!r}") from None


def validate_stage(kind: StageKind, primitive: str, params: Mapping[str, Any], index: int) -> StageSpec:
    """Check one stage against the registry and fill parameter defaults."""
    if primitive not in _REGISTRY:
        raise PipelineValidationError(f"unknown primitive {primitive!r}", index)
    desc = _REGISTRY[primitive]
    if desc.kind != kind:
        raise PipelineValidationError(
            f"primitive {primitive!r} has kind {desc.kind} but stage declares {kind}",
            index,
        )
    full: dict[str, Any] = {}
    for name, ps in desc.param_schema.items():
        if name in params:
            value = ps.coerce(params[name])
            try:
                ps.check(value)
            except (TypeError, ValueError) as exc:
                raise PipelineValidationError(
                    f"parameter {name!r} of {primitive!r}: {exc}", index
                ) from None
            full[name] = value
        else:
            full[name] = ps.default
    unknown = set(params) - set(desc.param_schema)
    if unknown:
        raise PipelineValidationError(
            f"unknown parameter(s) {sorted(unknown)} for {primitive!r}", index
        )
    return StageSpec(kind, primitive, full)


def make_pipeline(stages: list[StageSpec]) -> Pipeline:
    """Validate chain-level invariants and freeze the pipeline."""
    if not stages:
        raise PipelineValidationError("pipeline must have at least one stage")
    estimators = [i for i, s in enumerate(stages) if s.kind == StageKind.estimator]
    if len(estimators) != 1:
        raise PipelineValidationError(
            f"pipeline must have exactly one estimator stage, found {len(estimators)}"
        )
    for i in range(1, len(stages)):
        if stages[i].kind < stages[i - 1].kind:
            raise PipelineValidationError(
                f"stage kind {stages[i].kind} may not follow {stages[i - 1].kind}", i
            )
    return Pipeline(tuple(stages))


def pipeline_from_obj(obj: Any) -> Pipeline:
    """Build a validated Pipeline from a decoded JSON object."""
    if not isinstance(obj, dict) or "stages" not in obj:
        raise PipelineValidationError("pipeline document must be an object with a 'stages' array")
    raw_stages = obj["stages"]
    if not isinstance(raw_stages, list):
        raise PipelineValidationError("'stages' must be an array")
    stages = []
    for i, raw in enumerate(raw_stages):
        if not isinstance(raw, dict):
            raise PipelineValidationError("stage must be an object", i)
        try:
            kind = StageKind[raw["kind"]]
        except KeyError:
            raise PipelineValidationError(
                f"missing or unknown stage kind {raw.get('kind')!r}", i
            ) from None
        primitive = raw.get("primitive")
        if not isinstance(primitive, str):
            raise PipelineValidationError("stage must name a primitive", i)
        params = raw.get("params", {})
        if not isinstance(params, dict):
            raise PipelineValidationError("'params' must be an object", i)
        stages.append(validate_stage(kind, primitive, params, i))
    return make_pipeline(stages)


def parse_pipeline(text: str | dict) -> Pipeline:
    """Parse and validate a pipeline JSON document (string or decoded object)."""
    if isinstance(text, str):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise PipelineValidationError(f"invalid JSON: {exc}") from None
    else:
        obj = text
    return pipeline_from_obj(obj)


def pipeline_to_obj(p: Pipeline) -> dict:
    return {
        "stages": [
            {
                "kind": s.kind.name,
                "primitive": s.primitive,
                "params": {k: s.params[k] for k in sorted(s.params)},
            }
            for s in p.stages
        ]
    }


def serialize_pipeline(p: Pipeline) -> str:
    """Canonical JSON text: sorted keys, shortest round-trip reals."""
    return json.dumps(pipeline_to_obj(p), sort_keys=True, separators=(", ", ": "))


def canonical_text(p: Pipeline) -> list[str]:
    """One embedding string per stage: the call with actual values plus the doc header."""
    out = []
    for s in p.stages:
        desc = _REGISTRY[s.primitive]
        out.append(f"{desc.call_string(s.params)} — {desc.doc_header}")
    return out
